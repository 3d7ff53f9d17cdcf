#ifndef PICARD_PICARD_HPP
#define PICARD_PICARD_HPP

#include "picard/chain.hpp"
#include "picard/config.hpp"
#include "picard/engine.hpp"
#include "picard/experiment.hpp"
#include "picard/io.hpp"
#include "picard/kernels.hpp"
#include "picard/metrics.hpp"
#include "picard/rng.hpp"
#include "picard/sequential.hpp"
#include "picard/target.hpp"
#include "picard/targets/gaussian.hpp"
#include "picard/targets/regression.hpp"
#include "picard/targets/sir.hpp"
#include "picard/worker_pool.hpp"

#endif  // PICARD_PICARD_HPP
