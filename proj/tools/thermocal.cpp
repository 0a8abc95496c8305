#include "thermocal_app.hpp"

int main(int argc, char** argv) { return thermocal::app::run(argc, argv); }
