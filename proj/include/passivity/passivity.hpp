#pragma once

#include "passivity/core.hpp"
#include "passivity/spectra.hpp"
#include "passivity/ensemble.hpp"
#include "passivity/geometry.hpp"
#include "passivity/thermo.hpp"
#include "passivity/athermality.hpp"
#include "passivity/trajectories.hpp"
