#pragma once

#include <map>
#include <span>
#include <string>
#include <vector>

#include "xnec/corpus.hpp"
#include "xnec/model/encoder.hpp"

namespace xnec::pipeline {

using model::Matrix;

// Decoded 10 Hz frames of one clip; `gazes` is empty when the clip has no
// recorded gaze.
struct ClipMedia {
  std::vector<Matrix> images;
  std::vector<Matrix> gazes;
};

// Throws Errc::corrupt_video when the media frame count disagrees with the
// clip's telemetry length.
ClipMedia load_media(const corpus::Corpus& corpus, const corpus::ClipRecord& clip);

// Per-frame features, (channels, frames * cells): frame i in columns
// [i * cells, (i + 1) * cells).
Matrix encode_clip(const model::FovealEncoder& encoder, const ClipMedia& media);

struct ClipData {
  Matrix features;
  ClipMedia media;  // kept only when the backbone is trained
};

using ClipTable = std::map<std::string, ClipData>;

ClipTable load_clips(const corpus::Corpus& corpus, std::span<const std::string> vids,
                     const model::FovealEncoder& encoder, bool keep_media);

// Recomputes features after the backbone changed.
void refresh_features(ClipTable& table, const model::FovealEncoder& encoder);

}  // namespace xnec::pipeline
