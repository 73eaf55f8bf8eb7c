#include "ordpen/cli.hpp"

int main(int argc, char** argv)
{
    return ordpen::cli::main_entry(argc, argv);
}
