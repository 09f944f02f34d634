#include "stssdl/losses.hpp"

#include <cmath>

namespace stssdl {

NodePtr mae_loss(const std::vector<NodePtr>& pred_steps, const std::vector<Tensor>& target_steps,
                 std::optional<double> null_value) {
    if (pred_steps.empty() || pred_steps.size() != target_steps.size()) {
        throw ContractError("mae_loss: prediction/target step counts disagree");
    }

    std::size_t valid = 0;
    NodePtr abs_sum;  // sum of masked |pred - target| across all steps
    for (std::size_t t = 0; t < pred_steps.size(); ++t) {
        const NodePtr& pred = pred_steps[t];
        const Tensor& target = target_steps[t];
        require_same_shape(pred->value, target, "mae_loss");

        NodePtr diff = abs(sub(pred, constant(target)));
        if (null_value) {
            Tensor mask(target.shape);
            for (std::size_t i = 0; i < target.size(); ++i) {
                const bool keep = target[i] != *null_value;
                mask[i] = keep ? 1.0 : 0.0;
                valid += keep ? 1 : 0;
            }
            diff = mul(diff, constant(std::move(mask)));
        } else {
            valid += target.size();
        }
        // mean * numel == sum; keeps the reduction inside the op set
        NodePtr step_sum = scale(mean_all(diff), static_cast<double>(diff->value.size()));
        abs_sum = abs_sum ? add(abs_sum, step_sum) : step_sum;
    }
    if (valid == 0) throw ContractError("mae_loss: every entry masked, empty mean");
    return scale(abs_sum, 1.0 / static_cast<double>(valid));
}

NodePtr contrastive_loss(const NodePtr& qc, const NodePtr& pos, const NodePtr& neg, double margin,
                         bool stop_query) {
    if (margin <= 0.0) throw ConfigError("contrastive_loss: margin must be positive");
    require_same_shape(qc->value, pos->value, "contrastive_loss");
    require_same_shape(qc->value, neg->value, "contrastive_loss");

    NodePtr q = stop_query ? stop_gradient(qc) : qc;
    NodePtr d_pos = sq_l2_norm_rows(sub(q, pos));
    NodePtr d_neg = sq_l2_norm_rows(sub(q, neg));
    return mean_all(max_with_zero(shift(sub(d_pos, d_neg), margin)));
}

std::pair<NodePtr, DeviationDiagnostics> deviation_loss(const NodePtr& qc, const NodePtr& qa,
                                                        const NodePtr& pos_c, const NodePtr& pos_a,
                                                        bool stop_query) {
    require_same_shape(qc->value, qa->value, "deviation_loss");
    require_same_shape(pos_c->value, pos_a->value, "deviation_loss");

    NodePtr d_q = l1_norm_rows(sub(qc, qa));
    if (stop_query) d_q = stop_gradient(d_q);
    NodePtr d_p = l1_norm_rows(sub(pos_c, pos_a));
    NodePtr loss = mean_all(abs(sub(d_q, d_p)));
    return {loss, DeviationDiagnostics{d_q->value, d_p->value}};
}

namespace {

// cos(u,v) per row = sum(u.v) / (|u| |v| + 1e-12); the tiny shift under the
// square roots keeps the backward pass finite for zero rows.
NodePtr cosine_rows(const NodePtr& a, const NodePtr& b) {
    NodePtr dot = sum_rows(mul(a, b));
    NodePtr na = sqrt(shift(sq_l2_norm_rows(a), 1e-24));
    NodePtr nb = sqrt(shift(sq_l2_norm_rows(b), 1e-24));
    return div(dot, shift(mul(na, nb), 1e-12));
}

}  // namespace

NodePtr naive_deviation_loss(const Tensor& xc_per_node, const Tensor& xa_per_node,
                             const NodePtr& hc, const NodePtr& ha) {
    require_same_shape(xc_per_node, xa_per_node, "naive_deviation_loss");
    require_same_shape(hc->value, ha->value, "naive_deviation_loss");
    if (xc_per_node.rows() != hc->value.rows()) {
        throw DimensionError("naive_deviation_loss: node counts disagree, " +
                             shape_str(xc_per_node.shape) + " vs " + shape_str(hc->value.shape));
    }

    NodePtr cos_x = cosine_rows(constant(xc_per_node), constant(xa_per_node));
    NodePtr cos_h = cosine_rows(hc, ha);
    return mean_all(abs(sub(cos_x, cos_h)));
}

NodePtr total_loss(const NodePtr& l_mae, const NodePtr& l_con, const NodePtr& l_dev,
                   double lambda_con, double lambda_dev) {
    if (lambda_con < 0.0 || lambda_dev < 0.0) {
        throw ConfigError("total_loss: loss weights must be non-negative");
    }
    return add(l_mae, add(scale(l_con, lambda_con), scale(l_dev, lambda_dev)));
}

}  // namespace stssdl
