#pragma once

#include "lorec/config.hpp"
#include "lorec/contrast.hpp"
#include "lorec/engine.hpp"
#include "lorec/errors.hpp"
#include "lorec/graph.hpp"
#include "lorec/interventions.hpp"
#include "lorec/model.hpp"
#include "lorec/numerics.hpp"
#include "lorec/random.hpp"
