#pragma once

#include "gold/config.hpp"
#include "gold/embeddings.hpp"
#include "gold/error.hpp"
#include "gold/evaluator.hpp"
#include "gold/graph.hpp"
#include "gold/gru.hpp"
#include "gold/model.hpp"
#include "gold/noise.hpp"
#include "gold/planted.hpp"
#include "gold/random.hpp"
#include "gold/rules.hpp"
#include "gold/trainer.hpp"
