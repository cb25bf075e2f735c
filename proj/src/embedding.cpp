// SPDX-License-Identifier: Apache-2.0
#include "actionpose/embedding.hpp"

#include <fstream>
#include <iomanip>

#include "actionpose/parallel.hpp"

namespace actionpose {

EmbeddingTable compute_embeddings(ActionPoseModel& model, const Corpus& corpus,
                                  const TrainConfig& config) {
  if (corpus.clips.empty()) throw ValidationError("compute_embeddings: empty corpus");
  EmbeddingTable table;
  const int n = static_cast<int>(corpus.clips.size());
  table.h_p.resize(n, model.config().align_dim);
  table.clip_ids.resize(n);
  table.classes.resize(n);
  parallel_for(static_cast<std::size_t>(n), [&](std::size_t i) {
    const LabeledClip& clip = corpus.clips[i];
    const int len = std::min(config.sequence_frames, clip.motion.frames);
    const int start = (clip.motion.frames - len) / 2;
    PoseSeq3D window;
    window.layout = clip.motion.layout;
    window.fps = clip.motion.fps;
    window.frames = len;
    const int joints = clip.motion.joints();
    window.data = clip.motion.data.middleRows(static_cast<Eigen::Index>(start) * joints,
                                              static_cast<Eigen::Index>(len) * joints);
    const PoseSeq2D projected = project_orthographic(window, View::front);
    const PoseSeq2D input = normalize_to_pixels(projected, clip_bbox(projected));
    table.h_p.row(static_cast<Eigen::Index>(i)) = model.embed_pose(input).row(0);
    table.clip_ids[i] = clip.id;
    table.classes[i] = clip.action_class;
  });
  return table;
}

Eigen::MatrixXd pca_project_2d(const Eigen::MatrixXd& rows) {
  if (rows.rows() < 2) throw ValidationError("pca_project_2d: needs at least 2 rows");
  const Eigen::RowVectorXd mean = rows.colwise().mean();
  const Eigen::MatrixXd centered = rows.rowwise() - mean;
  const Eigen::MatrixXd cov =
      centered.transpose() * centered / static_cast<double>(rows.rows() - 1);
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(cov);
  // Eigenvalues come out ascending; take the last two columns.
  const Eigen::Index d = cov.cols();
  Eigen::MatrixXd basis(d, 2);
  basis.col(0) = solver.eigenvectors().col(d - 1);
  if (d >= 2) {
    basis.col(1) = solver.eigenvectors().col(d - 2);
  } else {
    basis.col(1).setZero();
  }
  for (int c = 0; c < 2; ++c) {
    Eigen::Index max_row = 0;
    basis.col(c).cwiseAbs().maxCoeff(&max_row);
    if (basis(max_row, c) < 0.0) basis.col(c) = -basis.col(c);
  }
  return centered * basis;
}

CosineSeparation cosine_separation(const EmbeddingTable& table) {
  CosineSeparation out;
  long intra = 0;
  long inter = 0;
  const Eigen::Index n = table.h_p.rows();
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index j = i + 1; j < n; ++j) {
      const double cosine = table.h_p.row(i).dot(table.h_p.row(j));
      if (table.classes[i] == table.classes[j]) {
        out.intra_class += cosine;
        ++intra;
      } else {
        out.inter_class += cosine;
        ++inter;
      }
    }
  }
  if (intra > 0) out.intra_class /= static_cast<double>(intra);
  if (inter > 0) out.inter_class /= static_cast<double>(inter);
  return out;
}

void write_embeddings_csv(const EmbeddingTable& table, const std::string& path) {
  std::ofstream os(path);
  if (!os) throw IoError("cannot write embeddings csv: " + path);
  os << std::setprecision(9);
  os << "clip_id,action_class";
  for (Eigen::Index c = 0; c < table.h_p.cols(); ++c) os << ",e" << c;
  os << "\n";
  for (Eigen::Index r = 0; r < table.h_p.rows(); ++r) {
    os << table.clip_ids[r] << ',' << to_string(table.classes[r]);
    for (Eigen::Index c = 0; c < table.h_p.cols(); ++c) os << ',' << table.h_p(r, c);
    os << "\n";
  }
}

void write_scatter_csv(const EmbeddingTable& table, const Eigen::MatrixXd& coords,
                       const std::string& path) {
  std::ofstream os(path);
  if (!os) throw IoError("cannot write scatter csv: " + path);
  os << std::setprecision(9);
  os << "clip_id,action_class,pc1,pc2\n";
  for (Eigen::Index r = 0; r < coords.rows(); ++r) {
    os << table.clip_ids[r] << ',' << to_string(table.classes[r]) << ',' << coords(r, 0)
       << ',' << coords(r, 1) << "\n";
  }
}

void write_scatter_svg(const EmbeddingTable& table, const Eigen::MatrixXd& coords,
                       const std::string& path) {
  static const char* kColors[] = {"#1f77b4", "#ff7f0e", "#2ca02c", "#d62728",
                                  "#9467bd", "#8c564b", "#e377c2", "#7f7f7f",
                                  "#bcbd22", "#17becf", "#444444"};
  std::ofstream os(path);
  if (!os) throw IoError("cannot write scatter svg: " + path);
  const double size = 640.0;
  const double margin = 40.0;
  double xmin = coords.col(0).minCoeff(), xmax = coords.col(0).maxCoeff();
  double ymin = coords.col(1).minCoeff(), ymax = coords.col(1).maxCoeff();
  const double xspan = std::max(xmax - xmin, 1e-9);
  const double yspan = std::max(ymax - ymin, 1e-9);
  auto sx = [&](double x) { return margin + (x - xmin) / xspan * (size - 2 * margin); };
  auto sy = [&](double y) { return size - margin - (y - ymin) / yspan * (size - 2 * margin); };

  os << std::setprecision(6);
  os << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << size << "\" height=\"" << size
     << "\">\n";
  os << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  for (Eigen::Index r = 0; r < coords.rows(); ++r) {
    const int cls = static_cast<int>(table.classes[r]);
    os << "<circle cx=\"" << sx(coords(r, 0)) << "\" cy=\"" << sy(coords(r, 1))
       << "\" r=\"4\" fill=\"" << kColors[cls % 11] << "\"><title>" << to_string(table.classes[r])
       << " clip " << table.clip_ids[r] << "</title></circle>\n";
  }
  // Legend: one entry per class present, in enum order.
  std::vector<bool> present(11, false);
  for (const auto c : table.classes) present[static_cast<int>(c)] = true;
  double ly = margin;
  for (int c = 0; c < 11; ++c) {
    if (!present[c]) continue;
    os << "<circle cx=\"" << size - margin - 90 << "\" cy=\"" << ly << "\" r=\"4\" fill=\""
       << kColors[c] << "\"/>\n";
    os << "<text x=\"" << size - margin - 80 << "\" y=\"" << ly + 4
       << "\" font-family=\"sans-serif\" font-size=\"12\">"
       << to_string(static_cast<ActionClass>(c)) << "</text>\n";
    ly += 18;
  }
  os << "</svg>\n";
}

}  // namespace actionpose
