#include "cli.hpp"

int main(int argc, char** argv)
{
    return emob::cli::run(argc, argv);
}
