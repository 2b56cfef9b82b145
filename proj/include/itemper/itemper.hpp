#pragma once

#include "itemper/analysis.hpp"
#include "itemper/coupling.hpp"
#include "itemper/engine.hpp"
#include "itemper/graph.hpp"
#include "itemper/kernels.hpp"
#include "itemper/models.hpp"
#include "itemper/parallel.hpp"
#include "itemper/random.hpp"
#include "itemper/state.hpp"
