#pragma once

#include "mcdrop/dropout.hpp"
#include "mcdrop/error.hpp"
#include "mcdrop/evaluation.hpp"
#include "mcdrop/inference.hpp"
#include "mcdrop/model.hpp"
#include "mcdrop/mutagenesis.hpp"
#include "mcdrop/parallel.hpp"
#include "mcdrop/report.hpp"
#include "mcdrop/rng.hpp"
#include "mcdrop/stats.hpp"
#include "mcdrop/tokenizer.hpp"
#include "mcdrop/weights_io.hpp"
