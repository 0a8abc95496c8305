#pragma once

#include "thermocal/core.hpp"
#include "thermocal/correction.hpp"
#include "thermocal/error.hpp"
#include "thermocal/io.hpp"
#include "thermocal/regression.hpp"
#include "thermocal/report_json.hpp"
#include "thermocal/selection.hpp"
#include "thermocal/sim_config.hpp"
#include "thermocal/simulator.hpp"
#include "thermocal/validation.hpp"
