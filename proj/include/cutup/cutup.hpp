#pragma once

#include "cutup/annotation.hpp"
#include "cutup/config.hpp"
#include "cutup/dataset.hpp"
#include "cutup/error.hpp"
#include "cutup/evaluation.hpp"
#include "cutup/frame_plan.hpp"
#include "cutup/labeling.hpp"
#include "cutup/parallel.hpp"
#include "cutup/random.hpp"
#include "cutup/rational.hpp"
#include "cutup/sampling.hpp"
#include "cutup/synth.hpp"
#include "cutup/version.hpp"
