#include "xnec/pipeline.hpp"

#include "xnec/error.hpp"

namespace xnec::pipeline {

ClipMedia load_media(const corpus::Corpus& corpus, const corpus::ClipRecord& clip) {
  ClipMedia media;
  const auto video = media::read_video(corpus.resolve(clip.video_path));
  if (video.frame_count() != clip.frame_count()) {
    throw Error(Errc::corrupt_video, clip.vid + ": video has " + std::to_string(video.frame_count()) +
                                         " frames, telemetry has " + std::to_string(clip.frame_count()));
  }
  for (std::size_t i = 0; i < video.frame_count(); ++i) media.images.push_back(media::to_matrix(video, i));
  if (!clip.gazemap_path.empty()) {
    const auto gaze = media::read_video(corpus.resolve(clip.gazemap_path));
    if (gaze.frame_count() != video.frame_count()) {
      throw Error(Errc::corrupt_video, clip.vid + ": gaze map and video frame counts differ");
    }
    for (std::size_t i = 0; i < gaze.frame_count(); ++i) media.gazes.push_back(media::to_matrix(gaze, i));
  }
  return media;
}

Matrix encode_clip(const model::FovealEncoder& encoder, const ClipMedia& media) {
  const int cells = encoder.config().cells();
  const auto n = static_cast<Eigen::Index>(media.images.size());
  Matrix out(model::FovealEncoder::kChannels, n * cells);
  const Matrix none;
  for (Eigen::Index i = 0; i < n; ++i) {
    const Matrix& gaze = media.gazes.empty() ? none : media.gazes[i];
    out.middleCols(i * cells, cells) = encoder.encode(media.images[i], gaze);
  }
  return out;
}

ClipTable load_clips(const corpus::Corpus& corpus, std::span<const std::string> vids,
                     const model::FovealEncoder& encoder, bool keep_media) {
  ClipTable table;
  for (const auto& vid : vids) {
    if (table.count(vid)) continue;
    ClipMedia media = load_media(corpus, corpus.find(vid));
    ClipData data;
    data.features = encode_clip(encoder, media);
    if (keep_media) data.media = std::move(media);
    table.emplace(vid, std::move(data));
  }
  return table;
}

void refresh_features(ClipTable& table, const model::FovealEncoder& encoder) {
  for (auto& [vid, data] : table) {
    if (data.media.images.empty()) throw Error(Errc::invalid_argument, vid + ": media not retained");
    data.features = encode_clip(encoder, data.media);
  }
}

}  // namespace xnec::pipeline
