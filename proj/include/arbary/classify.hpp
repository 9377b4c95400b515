#pragma once

#include <algorithm>
#include <map>
#include <string>
#include <vector>

#include "arbary/centroid.hpp"
#include "arbary/common.hpp"
#include "arbary/ot.hpp"
#include "arbary/spectral.hpp"

namespace arbary {

template <typename Scalar>
struct LabeledPsdSet {
  std::vector<Psd<Scalar>> psds;
  std::vector<std::string> labels;
  std::vector<std::string> classes;  // ordered distinct class list

  void rebuild_classes() {
    classes.clear();
    for (const auto& label : labels)
      if (std::find(classes.begin(), classes.end(), label) == classes.end())
        classes.push_back(label);
  }
};

enum class CentroidMethod { IS, KL, L2, OTBC, OTP };

inline const char* method_name(CentroidMethod m) {
  switch (m) {
    case CentroidMethod::IS: return "IS";
    case CentroidMethod::KL: return "KL";
    case CentroidMethod::L2: return "L2";
    case CentroidMethod::OTBC: return "OT-BC";
    case CentroidMethod::OTP: return "OT-P";
  }
  return "?";
}

template <typename Scalar>
struct CentroidBank {
  CentroidMethod method = CentroidMethod::L2;
  std::vector<std::string> classes;
  std::vector<Psd<Scalar>> centroids;
  std::vector<ArModel<Scalar>> models;  // OT-P only
  SinkhornConfig<Scalar> sinkhorn;      // scoring config for OT methods
  bool reverse_divergence = false;      // score D(centroid || test) instead
};

template <typename Scalar>
struct MetricsReport {
  Scalar acc = Scalar(0);
  Scalar bacc = Scalar(0);
  Scalar f1_macro = Scalar(0);
  Scalar auc_macro = Scalar(0);
  MatrixX<Index> confusion;  // rows: true class, cols: predicted
  std::vector<std::string> classes;
  std::string divergence_direction = "test||centroid";
};

template <typename Scalar>
struct ClassifierConfig {
  SinkhornConfig<Scalar> sinkhorn;
  OptimizerConfig<Scalar> optimizer;   // OT-P training
  MultiStartPlan multistart;           // OT-P training
  bool reverse_divergence = false;
};

template <typename Scalar>
CentroidBank<Scalar> fit_centroids(const LabeledPsdSet<Scalar>& train, CentroidMethod method,
                                   const GroundCost<Scalar>& cost,
                                   const ClassifierConfig<Scalar>& config) {
  if (train.psds.empty()) throw InvalidArgument("fit_centroids: empty training set");
  CentroidBank<Scalar> bank;
  bank.method = method;
  bank.classes = train.classes;
  bank.sinkhorn = config.sinkhorn;
  bank.reverse_divergence = config.reverse_divergence;
  for (const auto& cls : train.classes) {
    std::vector<Psd<Scalar>> members;
    for (std::size_t i = 0; i < train.psds.size(); ++i)
      if (train.labels[i] == cls) members.push_back(normalize(train.psds[i]));
    if (members.empty())
      throw InvalidArgument("fit_centroids: class '" + cls + "' has no training PSDs");
    switch (method) {
      case CentroidMethod::IS:
      case CentroidMethod::KL:
      case CentroidMethod::L2:
        bank.centroids.push_back(normalize(arithmetic_mean_centroid(members)));
        break;
      case CentroidMethod::OTBC:
        bank.centroids.push_back(free_barycenter(members, cost, config.sinkhorn));
        break;
      case CentroidMethod::OTP: {
        const auto report =
            multi_start_fit(members, config.multistart.build(), cost, config.optimizer);
        const auto& best = report.runs[report.best];
        bank.centroids.push_back(best.psd);
        bank.models.push_back(best.model);
        break;
      }
    }
  }
  return bank;
}

/// Per-class scores for one test PSD; score = -distance, so higher means
/// closer. OT methods use the entropic cost, baselines their divergence.
template <typename Scalar>
VectorX<Scalar> score(const Psd<Scalar>& psd, const CentroidBank<Scalar>& bank,
                      const GroundCost<Scalar>& cost) {
  const Psd<Scalar> test = normalize(psd);
  VectorX<Scalar> scores(Index(bank.classes.size()));
  for (std::size_t c = 0; c < bank.classes.size(); ++c) {
    const Psd<Scalar>& centroid = bank.centroids[c];
    Scalar distance = Scalar(0);
    switch (bank.method) {
      case CentroidMethod::IS:
        distance = bank.reverse_divergence ? baseline_distance(BaselineKind::IS, centroid, test)
                                           : baseline_distance(BaselineKind::IS, test, centroid);
        break;
      case CentroidMethod::KL:
        distance = bank.reverse_divergence ? baseline_distance(BaselineKind::KL, centroid, test)
                                           : baseline_distance(BaselineKind::KL, test, centroid);
        break;
      case CentroidMethod::L2:
        distance = baseline_distance(BaselineKind::L2, test, centroid);
        break;
      case CentroidMethod::OTBC:
      case CentroidMethod::OTP:
        distance = sinkhorn(test, centroid, cost, bank.sinkhorn).cost;
        break;
    }
    scores[Index(c)] = -distance;
  }
  return scores;
}

template <typename Scalar>
Index predict_index(const VectorX<Scalar>& scores) {
  Index best = 0;
  for (Index c = 1; c < scores.size(); ++c)
    if (scores[c] > scores[best]) best = c;  // ties keep the earlier class
  return best;
}

template <typename Scalar>
std::string predict(const Psd<Scalar>& psd, const CentroidBank<Scalar>& bank,
                    const GroundCost<Scalar>& cost) {
  return bank.classes[std::size_t(predict_index(score(psd, bank, cost)))];
}

/// Metrics from a precomputed score matrix (rows: test items, cols:
/// classes). Predictions are the row argmax. BACC averages recall over
/// classes present in the test set; F1 is macro over all bank classes;
/// AUC is macro one-vs-rest with ties counted half.
template <typename Scalar>
MetricsReport<Scalar> compute_metrics(const std::vector<std::string>& classes,
                                      const std::vector<Index>& true_idx,
                                      const MatrixX<Scalar>& scores) {
  const Index n_classes = Index(classes.size());
  const Index n = Index(true_idx.size());
  if (n == 0) throw InvalidArgument("compute_metrics: empty test set");
  MetricsReport<Scalar> report;
  report.classes = classes;
  report.confusion = MatrixX<Index>::Zero(n_classes, n_classes);
  for (Index i = 0; i < n; ++i) {
    const Index pred = predict_index(VectorX<Scalar>(scores.row(i).transpose()));
    report.confusion(true_idx[std::size_t(i)], pred) += 1;
  }

  Scalar correct = Scalar(0);
  for (Index c = 0; c < n_classes; ++c) correct += Scalar(report.confusion(c, c));
  report.acc = correct / Scalar(n);

  Scalar recall_sum = Scalar(0);
  Index supported = 0;
  for (Index c = 0; c < n_classes; ++c) {
    const Index support = report.confusion.row(c).sum();
    if (support == 0) continue;
    ++supported;
    recall_sum += Scalar(report.confusion(c, c)) / Scalar(support);
  }
  report.bacc = supported > 0 ? recall_sum / Scalar(supported) : Scalar(0);

  Scalar f1_sum = Scalar(0);
  for (Index c = 0; c < n_classes; ++c) {
    const Index tp = report.confusion(c, c);
    const Index support = report.confusion.row(c).sum();
    const Index predicted = report.confusion.col(c).sum();
    if (tp == 0 || support == 0 || predicted == 0) continue;  // F1 contribution 0
    const Scalar precision = Scalar(tp) / Scalar(predicted);
    const Scalar recall = Scalar(tp) / Scalar(support);
    f1_sum += Scalar(2) * precision * recall / (precision + recall);
  }
  report.f1_macro = f1_sum / Scalar(n_classes);

  Scalar auc_sum = Scalar(0);
  Index auc_classes = 0;
  for (Index c = 0; c < n_classes; ++c) {
    Scalar wins = Scalar(0);
    Index n_pos = 0, n_neg = 0;
    for (Index i = 0; i < n; ++i) {
      if (true_idx[std::size_t(i)] != c) continue;
      ++n_pos;
      for (Index j = 0; j < n; ++j) {
        if (true_idx[std::size_t(j)] == c) continue;
        if (scores(i, c) > scores(j, c))
          wins += Scalar(1);
        else if (scores(i, c) == scores(j, c))
          wins += Scalar(0.5);
      }
    }
    n_neg = n - n_pos;
    if (n_pos == 0 || n_neg == 0) continue;
    auc_sum += wins / (Scalar(n_pos) * Scalar(n_neg));
    ++auc_classes;
  }
  report.auc_macro = auc_classes > 0 ? auc_sum / Scalar(auc_classes) : Scalar(0);
  return report;
}

template <typename Scalar>
MetricsReport<Scalar> evaluate(const LabeledPsdSet<Scalar>& test, const CentroidBank<Scalar>& bank,
                               const GroundCost<Scalar>& cost) {
  if (test.psds.empty()) throw InvalidArgument("evaluate: empty test set");
  std::vector<Index> true_idx(test.psds.size());
  for (std::size_t i = 0; i < test.psds.size(); ++i) {
    const auto it = std::find(bank.classes.begin(), bank.classes.end(), test.labels[i]);
    if (it == bank.classes.end())
      throw InvalidArgument("evaluate: test label '" + test.labels[i] + "' not in bank");
    true_idx[i] = Index(it - bank.classes.begin());
  }
  MatrixX<Scalar> scores(Index(test.psds.size()), Index(bank.classes.size()));
  for (std::size_t i = 0; i < test.psds.size(); ++i)
    scores.row(Index(i)) = score(test.psds[i], bank, cost).transpose();
  MetricsReport<Scalar> report = compute_metrics(bank.classes, true_idx, scores);
  report.divergence_direction = bank.reverse_divergence ? "centroid||test" : "test||centroid";
  return report;
}

}  // namespace arbary
