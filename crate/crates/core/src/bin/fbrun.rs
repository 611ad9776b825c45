fn main() -> std::process::ExitCode {
    fbcomm::appcli::fbrun_main()
}
