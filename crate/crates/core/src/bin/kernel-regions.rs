fn main() {
    std::process::exit(kernel_regions::cli::run());
}
