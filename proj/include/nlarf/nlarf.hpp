#pragma once

#include "nlarf/errors.hpp"
#include "nlarf/experiments.hpp"
#include "nlarf/forest.hpp"
#include "nlarf/nlar.hpp"
#include "nlarf/noise_models.hpp"
#include "nlarf/oracle.hpp"
#include "nlarf/partition.hpp"
#include "nlarf/random.hpp"
#include "nlarf/tree_builder.hpp"
