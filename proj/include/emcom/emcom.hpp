#pragma once

#include "emcom/agents.hpp"
#include "emcom/autodiff.hpp"
#include "emcom/checkpoint.hpp"
#include "emcom/config.hpp"
#include "emcom/game.hpp"
#include "emcom/gumbel.hpp"
#include "emcom/illearn.hpp"
#include "emcom/language.hpp"
#include "emcom/meanings.hpp"
#include "emcom/nn.hpp"
#include "emcom/optim.hpp"
#include "emcom/rng.hpp"
#include "emcom/runner.hpp"
#include "emcom/tensor.hpp"
