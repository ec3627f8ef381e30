#pragma once

#include "mcgp/baselines.hpp"
#include "mcgp/commands.hpp"
#include "mcgp/config.hpp"
#include "mcgp/csv.hpp"
#include "mcgp/emulator.hpp"
#include "mcgp/error.hpp"
#include "mcgp/fem.hpp"
#include "mcgp/gp_core.hpp"
#include "mcgp/io.hpp"
#include "mcgp/kernel.hpp"
#include "mcgp/mesh.hpp"
#include "mcgp/metrics.hpp"
#include "mcgp/mixture.hpp"
#include "mcgp/optim.hpp"
#include "mcgp/parallel.hpp"
