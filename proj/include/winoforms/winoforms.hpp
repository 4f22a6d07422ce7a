#pragma once

#include "winoforms/error.hpp"
#include "winoforms/gradcore/checkpoint.hpp"
#include "winoforms/gradcore/gradcheck.hpp"
#include "winoforms/gradcore/optimizer.hpp"
#include "winoforms/gradcore/parameters.hpp"
#include "winoforms/gradcore/schedule.hpp"
#include "winoforms/gradcore/tape.hpp"
#include "winoforms/gradcore/tensor.hpp"
#include "winoforms/textkit/vocabulary.hpp"
#include "winoforms/encoder/config.hpp"
#include "winoforms/encoder/encoder.hpp"
#include "winoforms/encoder/pretrain.hpp"
#include "winoforms/corpus/schema.hpp"
#include "winoforms/corpus/lexicon.hpp"
#include "winoforms/corpus/loaders.hpp"
#include "winoforms/corpus/preprocess.hpp"
#include "winoforms/corpus/synthetic.hpp"
#include "winoforms/formalizations/kind.hpp"
#include "winoforms/formalizations/formalization.hpp"
#include "winoforms/formalizations/dataset.hpp"
#include "winoforms/trainer/trainer.hpp"
#include "winoforms/sweep/stats.hpp"
#include "winoforms/sweep/sweep.hpp"
#include "winoforms/report/report.hpp"
