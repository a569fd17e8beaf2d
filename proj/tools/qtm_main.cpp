#include "qtm/cli_app.hpp"

int main(int argc, char** argv) { return qtm::cli::run(argc, argv); }
