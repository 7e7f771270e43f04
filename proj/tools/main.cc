#include "cli.h"

int main(int argc, char** argv) { return sdcert::cli::main_entry(argc, argv); }
