fn main() -> std::process::ExitCode {
    pmu_cli::run(std::env::args_os())
}
