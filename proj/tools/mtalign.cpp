#include <mtalign/cli.hpp>

int main(int argc, char** argv)
{
    return mtalign::run_cli(argc, argv);
}
