use kinreg::harness;

fn main() {
    std::process::exit(harness::cli_main());
}
