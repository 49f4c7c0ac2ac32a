#pragma once

// Umbrella header.

#include "cigan/core/config.hpp"
#include "cigan/core/errors.hpp"
#include "cigan/core/image.hpp"
#include "cigan/core/io.hpp"
#include "cigan/core/png_io.hpp"
#include "cigan/core/rng.hpp"
#include "cigan/core/sha256.hpp"
#include "cigan/core/tensor.hpp"

#include "cigan/data/archive.hpp"
#include "cigan/data/manifest.hpp"
#include "cigan/data/patch.hpp"
#include "cigan/data/phantom.hpp"
#include "cigan/data/sampling.hpp"

#include "cigan/nn/adam.hpp"
#include "cigan/nn/checkpoint.hpp"
#include "cigan/nn/layers.hpp"
#include "cigan/nn/params.hpp"

#include "cigan/gan/discriminator.hpp"
#include "cigan/gan/extractor.hpp"
#include "cigan/gan/generator.hpp"
#include "cigan/gan/losses.hpp"
#include "cigan/gan/synthesize.hpp"
#include "cigan/gan/trainer.hpp"

#include "cigan/cls/augment.hpp"
#include "cigan/cls/classifier.hpp"
#include "cigan/cls/curriculum.hpp"
#include "cigan/cls/harness.hpp"

#include "cigan/eval/auc.hpp"
#include "cigan/eval/delong.hpp"
#include "cigan/eval/figures.hpp"
#include "cigan/eval/report.hpp"
