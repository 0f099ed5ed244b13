#pragma once

#include "lidsvd/audio.hpp"
#include "lidsvd/container.hpp"
#include "lidsvd/embedding.hpp"
#include "lidsvd/error.hpp"
#include "lidsvd/features.hpp"
#include "lidsvd/gmm.hpp"
#include "lidsvd/ngram.hpp"
#include "lidsvd/pipeline.hpp"
#include "lidsvd/segmentation.hpp"
#include "lidsvd/supervector.hpp"
#include "lidsvd/svm.hpp"
#include "lidsvd/synthcorpus.hpp"
