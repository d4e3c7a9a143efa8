#pragma once

// Umbrella header for the DFIG wind-turbine modelling and control library.

#include "dfig/errors.hpp"
#include "dfig/numerics.hpp"
#include "dfig/plant.hpp"
#include "dfig/controller.hpp"
#include "dfig/sim.hpp"
#include "dfig/scenarios.hpp"
#include "dfig/analysis.hpp"
#include "dfig/csv.hpp"
#include "dfig/svg.hpp"
#include "dfig/config.hpp"
