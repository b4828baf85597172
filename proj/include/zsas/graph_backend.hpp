#pragma once

#include <filesystem>
#include <memory>

#include "zsas/backend.hpp"

namespace zsas {

// Expected graph signatures (N = static point count, K = candidate count):
//
//   encoder: image[1,3,S,S] -> image_embeddings[1,C,h,w]
//   decoder: image_embeddings[1,C,h,w], point_coords[1,N,2], point_labels[1,N],
//            mask_input[1,1,L,L], has_mask_input[1], orig_im_size[2]
//            -> masks[1,K,S,S], iou_predictions[1,K], low_res_masks[1,K,L,L]
//   scorer:  image[1,3,R,R] -> anomaly_map[1,1,R,R]
//
// Every graph carries metadata `mean`, `std` (JSON arrays of 3) and
// `input_size`. Point labels: 1 positive, 0 negative, 2/3 box corners,
// -1 padding.

BackendPair load_graph_backend(const std::filesystem::path& encoder_graph,
                               const std::filesystem::path& decoder_graph,
                               const std::filesystem::path& scorer_graph);

/// Decoder only, for serving stored embeddings (encode() throws). The graph
/// must match the given resolutions.
std::shared_ptr<const SegmenterBackend> load_graph_decoder(const std::filesystem::path& decoder_graph,
                                                           int working_resolution,
                                                           int logit_resolution);

}  // namespace zsas
