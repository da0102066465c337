#pragma once

// Umbrella header for the data-dependent random projection toolkit.

#include "ddrp/decompose.hpp"
#include "ddrp/errors.hpp"
#include "ddrp/fmm.hpp"
#include "ddrp/io.hpp"
#include "ddrp/learn.hpp"
#include "ddrp/matrix.hpp"
#include "ddrp/moments.hpp"
#include "ddrp/parallel.hpp"
#include "ddrp/preprocess.hpp"
#include "ddrp/projection.hpp"
#include "ddrp/rng.hpp"
#include "ddrp/synth.hpp"
