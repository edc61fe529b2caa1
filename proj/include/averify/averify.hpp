#pragma once

// Umbrella header.

#include "averify/binary.hpp"
#include "averify/common.hpp"
#include "averify/compression.hpp"
#include "averify/corpus.hpp"
#include "averify/corpus_io.hpp"
#include "averify/evaluation.hpp"
#include "averify/features.hpp"
#include "averify/registry.hpp"
#include "averify/svm.hpp"
#include "averify/synth.hpp"
#include "averify/trace.hpp"
#include "averify/unary.hpp"
#include "averify/verifier.hpp"
