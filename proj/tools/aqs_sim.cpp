#include "cli_app.hpp"

int main(int argc, char** argv) { return aqs::cli::run_main(argc, argv); }
