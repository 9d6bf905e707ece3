#pragma once

#include "marketlearn/core.hpp"
#include "marketlearn/random.hpp"
#include "marketlearn/penalty.hpp"
#include "marketlearn/cost_market.hpp"
#include "marketlearn/scoring_market.hpp"
#include "marketlearn/learning.hpp"
#include "marketlearn/bench.hpp"
