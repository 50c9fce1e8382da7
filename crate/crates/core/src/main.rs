fn main() {
    std::process::exit(pic_offload::cli::run_main(std::env::args_os()));
}
