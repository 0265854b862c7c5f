#pragma once

#include "lmn/answering.hpp"
#include "lmn/error.hpp"
#include "lmn/frame_encoder.hpp"
#include "lmn/io/binary.hpp"
#include "lmn/io/dataset.hpp"
#include "lmn/io/files.hpp"
#include "lmn/io/qa_jsonl.hpp"
#include "lmn/io/subsample.hpp"
#include "lmn/io/subtitles.hpp"
#include "lmn/io/synthetic.hpp"
#include "lmn/model.hpp"
#include "lmn/parallel.hpp"
#include "lmn/random.hpp"
#include "lmn/subtitle_memory.hpp"
#include "lmn/training.hpp"
#include "lmn/types.hpp"
#include "lmn/word_memory.hpp"
