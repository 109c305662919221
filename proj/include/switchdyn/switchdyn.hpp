#pragma once

#include "switchdyn/checks.hpp"
#include "switchdyn/commands.hpp"
#include "switchdyn/config.hpp"
#include "switchdyn/dynamics.hpp"
#include "switchdyn/errors.hpp"
#include "switchdyn/experiments.hpp"
#include "switchdyn/integrator.hpp"
#include "switchdyn/landscape.hpp"
#include "switchdyn/report_io.hpp"
#include "switchdyn/rng.hpp"
#include "switchdyn/spectral.hpp"
