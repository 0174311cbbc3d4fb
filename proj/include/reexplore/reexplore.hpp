#pragma once

#include "reexplore/core.hpp"
#include "reexplore/gridworld.hpp"
#include "reexplore/occupancy.hpp"
#include "reexplore/hierarchy.hpp"
#include "reexplore/textgen.hpp"
#include "reexplore/experience.hpp"
#include "reexplore/retrieval.hpp"
#include "reexplore/policy.hpp"
#include "reexplore/metrics.hpp"
#include "reexplore/harness.hpp"
