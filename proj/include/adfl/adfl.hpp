#pragma once

#include "adfl/aggregation.hpp"
#include "adfl/allocation.hpp"
#include "adfl/bounds.hpp"
#include "adfl/config.hpp"
#include "adfl/cost_model.hpp"
#include "adfl/csv.hpp"
#include "adfl/error.hpp"
#include "adfl/learning/constants.hpp"
#include "adfl/learning/dataset.hpp"
#include "adfl/learning/model.hpp"
#include "adfl/manifest.hpp"
#include "adfl/rng.hpp"
#include "adfl/simulator.hpp"
#include "adfl/topology.hpp"
