#pragma once

// Umbrella header.

#include "dtheory/errors.hpp"
#include "dtheory/lattice.hpp"
#include "dtheory/terms.hpp"
#include "dtheory/rng.hpp"
#include "dtheory/linalg.hpp"
#include "dtheory/mps.hpp"
#include "dtheory/mpo.hpp"
#include "dtheory/effective.hpp"
#include "dtheory/dmrg.hpp"
#include "dtheory/oracle.hpp"
#include "dtheory/observables.hpp"
#include "dtheory/spiral.hpp"
#include "dtheory/dynamics.hpp"
#include "dtheory/mc.hpp"
#include "dtheory/checkpoint.hpp"
#include "dtheory/pipeline.hpp"
