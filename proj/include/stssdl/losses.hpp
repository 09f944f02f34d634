#pragma once

#include <optional>

#include "stssdl/autodiff.hpp"

namespace stssdl {

// Scalar components of one training objective evaluation.
// total = l_mae + lambda_con * l_con + lambda_dev * l_dev.
struct LossBreakdown {
    double l_mae = 0.0;
    double l_con = 0.0;
    double l_dev = 0.0;
    double total = 0.0;
    double lambda_con = 0.0;
    double lambda_dev = 0.0;
};

// Per-node stopped query distance d_q = |Qc - Qa|_1 and positive-prototype
// distance d_p = |Pc - Pa|_1; the two sides of the deviation objective.
struct DeviationDiagnostics {
    Tensor d_q;
    Tensor d_p;
};

// Mean absolute error over all entries, per-step prediction/target pairs.
// Entries whose target equals null_value are excluded from numerator and
// denominator. Targets are constants, predictions are graph nodes.
NodePtr mae_loss(const std::vector<NodePtr>& pred_steps, const std::vector<Tensor>& target_steps,
                 std::optional<double> null_value);

// Triplet-style hinge: mean_n max(|stop(Q_n)-pos_n|^2 - |stop(Q_n)-neg_n|^2 + margin, 0).
// Gradients reach pos/neg only; the query is frozen.
NodePtr contrastive_loss(const NodePtr& qc, const NodePtr& pos, const NodePtr& neg, double margin,
                         bool stop_query = true);

// Distance-of-distances: mean_n | stop(|Qc_n-Qa_n|_1) - |pos_c_n-pos_a_n|_1 |.
std::pair<NodePtr, DeviationDiagnostics> deviation_loss(const NodePtr& qc, const NodePtr& qa,
                                                        const NodePtr& pos_c, const NodePtr& pos_a,
                                                        bool stop_query = true);

// Ablation without prototypes: mean_n |cos(Xc_n, Xa_n) - cos(Hc_n, Ha_n)|,
// cosine floored at 1e-12 in the denominator. X rows are constants.
NodePtr naive_deviation_loss(const Tensor& xc_per_node, const Tensor& xa_per_node,
                             const NodePtr& hc, const NodePtr& ha);

NodePtr total_loss(const NodePtr& l_mae, const NodePtr& l_con, const NodePtr& l_dev,
                   double lambda_con, double lambda_dev);

}  // namespace stssdl
