#pragma once

#include "seqplan/bandwidth.hpp"
#include "seqplan/config.hpp"
#include "seqplan/cost.hpp"
#include "seqplan/mempool.hpp"
#include "seqplan/model.hpp"
#include "seqplan/overlap_sim.hpp"
#include "seqplan/placement.hpp"
#include "seqplan/report.hpp"
#include "seqplan/search.hpp"
#include "seqplan/strategy.hpp"
