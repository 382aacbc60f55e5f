#pragma once

#include "epne/common.hpp"
#include "epne/config.hpp"
#include "epne/eval.hpp"
#include "epne/graph.hpp"
#include "epne/io.hpp"
#include "epne/kernels.hpp"
#include "epne/model.hpp"
#include "epne/synth.hpp"
#include "epne/walks.hpp"
