#pragma once

// Umbrella header.

#include "elscreen/common.hpp"
#include "elscreen/conditional.hpp"
#include "elscreen/el_core.hpp"
#include "elscreen/evalkit.hpp"
#include "elscreen/experiments.hpp"
#include "elscreen/parallel.hpp"
#include "elscreen/pipeline.hpp"
#include "elscreen/screening.hpp"
#include "elscreen/simgen.hpp"
