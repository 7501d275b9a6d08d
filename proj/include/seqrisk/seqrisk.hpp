#pragma once

#include "bleu.hpp"
#include "checkpoint.hpp"
#include "corpus.hpp"
#include "model.hpp"
#include "objectives.hpp"
#include "report.hpp"
#include "rng.hpp"
#include "tensor.hpp"
#include "text.hpp"
#include "train.hpp"
#include "translate.hpp"
#include "vocab.hpp"