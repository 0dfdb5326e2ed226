#include "crawl/gradcheck_suite.hpp"

#include <cmath>

#include "crawl/model.hpp"
#include "crawl/nn.hpp"
#include "crawl/rng.hpp"
#include "crawl/walks.hpp"

namespace crawl {

namespace {

using nn::TensorPtr;

TensorPtr random_tensor(std::vector<int64_t> shape, RngStream& rng, double kink_margin = 0.0) {
    auto t = nn::make_tensor(std::move(shape));
    for (auto& x : t->v) {
        x = rng.uniform_symmetric(1.0);
        // Keep finite differences away from activation kinks.
        if (kink_margin > 0.0 && std::abs(x) < kink_margin)
            x = x < 0.0 ? -kink_margin : kink_margin;
    }
    return t;
}

std::shared_ptr<const std::vector<double>> random_coefs(int64_t n, RngStream& rng) {
    auto c = std::make_shared<std::vector<double>>(n);
    for (auto& x : *c) x = rng.uniform_symmetric(1.0);
    return c;
}

AuditResult run_one(const std::string& name,
                    const std::function<TensorPtr(nn::Tape*)>& loss,
                    const std::vector<std::pair<std::string, TensorPtr>>& inputs, double tol) {
    nn::GradCheckReport rep = nn::grad_check(loss, inputs);
    return {name, rep.max_rel_err, rep.n_coords, rep.passed(tol)};
}

}  // namespace

std::vector<AuditResult> run_gradient_audit(double tol) {
    std::vector<AuditResult> out;
    RngStream rng(0x9AD5EEDull, RngStream::stream_id("gradient_audit"));

    {  // conv1d
        auto x = random_tensor({2, 7, 3}, rng);
        auto w = random_tensor({3, 4, 3}, rng);
        auto coefs = random_coefs(2 * 5 * 4, rng);
        out.push_back(run_one(
            "conv1d",
            [&](nn::Tape* t) { return nn::weighted_sum(t, nn::conv1d(t, x, w), coefs); },
            {{"x", x}, {"w", w}}, tol));
    }
    {  // depthwise_conv1d
        auto x = random_tensor({2, 7, 4}, rng);
        auto w = random_tensor({4, 3}, rng);
        auto coefs = random_coefs(2 * 5 * 4, rng);
        out.push_back(run_one(
            "depthwise_conv1d",
            [&](nn::Tape* t) {
                return nn::weighted_sum(t, nn::depthwise_conv1d(t, x, w), coefs);
            },
            {{"x", x}, {"w", w}}, tol));
    }
    {  // linear with bias
        auto x = random_tensor({5, 4}, rng);
        auto w = random_tensor({4, 3}, rng);
        auto b = random_tensor({3}, rng);
        auto coefs = random_coefs(5 * 3, rng);
        out.push_back(run_one(
            "linear",
            [&](nn::Tape* t) { return nn::weighted_sum(t, nn::linear(t, x, w, b), coefs); },
            {{"x", x}, {"w", w}, {"b", b}}, tol));
    }
    {  // relu
        auto x = random_tensor({4, 6}, rng, 0.05);
        auto coefs = random_coefs(24, rng);
        out.push_back(run_one(
            "relu", [&](nn::Tape* t) { return nn::weighted_sum(t, nn::relu(t, x), coefs); },
            {{"x", x}}, tol));
    }
    {  // batch_norm, training mode
        auto x = random_tensor({8, 3}, rng);
        nn::BatchNorm bn(3);
        auto gm = bn.gamma;
        for (auto& v : gm->v) v = 1.0 + rng.uniform_symmetric(0.3);
        auto coefs = random_coefs(24, rng);
        out.push_back(run_one(
            "batch_norm_train",
            [&, coefs](nn::Tape* t) {
                return nn::weighted_sum(t, bn.forward(t, x, true), coefs);
            },
            {{"x", x}, {"gamma", bn.gamma}, {"beta", bn.beta}}, tol));
    }
    {  // batch_norm, inference mode
        auto x = random_tensor({5, 3}, rng);
        nn::BatchNorm bn(3);
        for (size_t i = 0; i < bn.running_var.size(); ++i) {
            bn.running_mean[i] = rng.uniform_symmetric(0.5);
            bn.running_var[i] = 0.5 + rng.uniform();
        }
        auto coefs = random_coefs(15, rng);
        out.push_back(run_one(
            "batch_norm_eval",
            [&, coefs](nn::Tape* t) {
                return nn::weighted_sum(t, bn.forward(t, x, false), coefs);
            },
            {{"x", x}, {"gamma", bn.gamma}, {"beta", bn.beta}}, tol));
    }
    {  // dropout with a fixed mask
        auto x = random_tensor({6, 4}, rng);
        auto coefs = random_coefs(24, rng);
        out.push_back(run_one(
            "dropout",
            [&](nn::Tape* t) {
                RngStream mask_rng(42, RngStream::stream_id("audit_dropout"));
                return nn::weighted_sum(t, nn::dropout(t, x, 0.4, true, mask_rng), coefs);
            },
            {{"x", x}}, tol));
    }
    {  // conv module stack
        RngStream init(7, RngStream::stream_id("audit_convmodule"));
        nn::ConvModule cm(5, 4, 3, init);
        auto x = random_tensor({3, 8, 5}, rng);
        auto coefs = random_coefs(3 * 6 * 4, rng);
        nn::ParamMap pm;
        cm.collect(pm, "cm");
        std::vector<std::pair<std::string, TensorPtr>> inputs = {{"x", x}};
        for (auto& [n, t] : pm.items) inputs.emplace_back(n, t);
        out.push_back(run_one(
            "conv_module",
            [&, coefs](nn::Tape* t) {
                return nn::weighted_sum(t, cm.forward(t, x, true), coefs);
            },
            inputs, tol));
    }
    {  // group reduce + broadcast
        auto x = random_tensor({6, 3}, rng);
        auto a = random_tensor({2, 3}, rng);
        auto groups = std::make_shared<nn::RowGroups>(
            nn::RowGroups{{0, 2, 4}, {1, 3, 5}});
        std::vector<int> node2graph = {0, 1, 0, 1, 0, 1};
        auto coefs = random_coefs(6, rng);
        out.push_back(run_one(
            "group_reduce_broadcast",
            [&, coefs](nn::Tape* t) {
                auto y = nn::group_broadcast_add(t, x, a, node2graph);
                auto r = nn::group_reduce(t, y, groups, true);
                return nn::weighted_sum(t, r, coefs);
            },
            {{"x", x}, {"a", a}}, tol));
    }
    {  // cross entropy
        auto logits = random_tensor({5, 4}, rng);
        std::vector<int> labels = {0, 1, 2, 3, 1};
        out.push_back(run_one(
            "cross_entropy",
            [&](nn::Tape* t) { return nn::cross_entropy(t, logits, labels); },
            {{"logits", logits}}, tol));
    }
    {  // l1 loss away from the kink
        auto pred = random_tensor({6}, rng);
        std::vector<double> target(6);
        for (size_t i = 0; i < target.size(); ++i) target[i] = pred->v[i] + (i % 2 ? 0.5 : -0.5);
        out.push_back(run_one(
            "l1_loss", [&](nn::Tape* t) { return nn::l1_loss(t, pred, target); },
            {{"pred", pred}}, tol));
    }

    // Composed model: two layers, d=4, s=2, frozen walks. The graph carries
    // triangles and random node features and the walks may backtrack, so
    // both structural encodings fire and no pre-activation collapses onto a
    // ReLU kink.
    for (bool vn : {false, true}) {
        ModelConfig cfg;
        cfg.num_layers = 2;
        cfg.hidden = 4;
        cfg.conv_channels = 4;
        cfg.window = 2;
        cfg.virtual_node = vn;
        cfg.dropout = 0.0;
        cfg.train_walk_len = 8;
        cfg.eval_walk_len = 8;
        cfg.in_dim = 2;
        cfg.out_dim = 2;
        cfg.strategy = WalkStrategy::Uniform;

        FeatureTable nf;
        nf.rows = 6;
        nf.cols = 2;
        for (int i = 0; i < 12; ++i) nf.values.push_back(rng.uniform_symmetric(1.0));
        Graph g(6, {{0, 1}, {1, 2}, {2, 3}, {3, 4}, {4, 5}, {5, 0}, {1, 4}, {0, 2}, {3, 5}},
                nf, FeatureTable{}, std::nullopt);
        GraphBatch batch = make_batch({&g});
        WalkSet ws = sample_walks(batch.merged, WalkStrategy::Uniform, 1.0, 8, 99);
        batch.class_labels = {1};

        CrawlNet net(cfg, 0xF00Dull);
        nn::ParamMap pm = net.params();
        std::vector<std::pair<std::string, TensorPtr>> inputs;
        for (auto& [n, t] : pm.items) inputs.emplace_back(n, t);
        out.push_back(run_one(
            vn ? "model_2layer_vn" : "model_2layer",
            [&](nn::Tape* t) {
                auto logits = net.forward(t, batch, ws, true, RngStream(0, 0));
                return nn::cross_entropy(t, logits, batch.class_labels);
            },
            inputs, tol));
    }
    return out;
}

}  // namespace crawl
