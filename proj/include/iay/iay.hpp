#pragma once

#include "iay/errors.hpp"
#include "iay/measures.hpp"
#include "iay/parallel.hpp"
#include "iay/boundaries.hpp"
#include "iay/ensemble.hpp"
#include "iay/rng.hpp"
#include "iay/oracle.hpp"
#include "iay/mc_engine.hpp"
#include "iay/verify.hpp"
#include "iay/pricing.hpp"
#include "iay/extension_n3.hpp"
#include "iay/io.hpp"
