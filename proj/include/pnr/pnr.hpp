#pragma once

// Everything except the file-level pipeline (pnr/pipeline.hpp), which also
// needs OpenSSL for artifact hashes.

#include "pnr/bundle_io.hpp"
#include "pnr/confidence.hpp"
#include "pnr/emg.hpp"
#include "pnr/error.hpp"
#include "pnr/fft.hpp"
#include "pnr/fitting.hpp"
#include "pnr/histogram.hpp"
#include "pnr/least_squares.hpp"
#include "pnr/pca.hpp"
#include "pnr/preprocess.hpp"
#include "pnr/projection.hpp"
#include "pnr/synth.hpp"
#include "pnr/trace.hpp"
