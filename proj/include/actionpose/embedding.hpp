// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <Eigen/Dense>
#include <string>
#include <vector>

#include "actionpose/corpus.hpp"
#include "actionpose/model.hpp"
#include "actionpose/trainer.hpp"

namespace actionpose {

// Global pose representations of every corpus clip (front view, centered
// window, inference mode). Rows are unit-normalized.
struct EmbeddingTable {
  Eigen::MatrixXd h_p;  // N x align_dim
  std::vector<std::uint32_t> clip_ids;
  std::vector<ActionClass> classes;
};

EmbeddingTable compute_embeddings(ActionPoseModel& model, const Corpus& corpus,
                                  const TrainConfig& config);

// Deterministic principal-component projection to 2D (sign convention: the
// largest-magnitude loading of each component is positive).
Eigen::MatrixXd pca_project_2d(const Eigen::MatrixXd& rows);

// Mean cosine similarity of same-class vs different-class row pairs.
struct CosineSeparation {
  double intra_class = 0.0;
  double inter_class = 0.0;
};
CosineSeparation cosine_separation(const EmbeddingTable& table);

// CSV: clip_id,action_class,e0,...,e{D-1}.
void write_embeddings_csv(const EmbeddingTable& table, const std::string& path);
// CSV: clip_id,action_class,pc1,pc2.
void write_scatter_csv(const EmbeddingTable& table, const Eigen::MatrixXd& coords,
                       const std::string& path);
// Standalone SVG scatter plot colored by class.
void write_scatter_svg(const EmbeddingTable& table, const Eigen::MatrixXd& coords,
                       const std::string& path);

}  // namespace actionpose
