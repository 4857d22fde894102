// SPDX-License-Identifier: Apache-2.0
#pragma once

#include "conductivity.hpp"
#include "config.hpp"
#include "dynamics.hpp"
#include "equilibrium.hpp"
#include "errors.hpp"
#include "experiment.hpp"
#include "io.hpp"
#include "lattice.hpp"
#include "linalg.hpp"
#include "response.hpp"
#include "tolerances.hpp"
#include "waveform.hpp"
