#pragma once

#include <mtalign/correlation.hpp>
#include <mtalign/error.hpp>
#include <mtalign/image.hpp>
#include <mtalign/pgm.hpp>
#include <mtalign/pipeline.hpp>
#include <mtalign/polar.hpp>
#include <mtalign/sequencer.hpp>
#include <mtalign/synthgen.hpp>
