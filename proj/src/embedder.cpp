#include "a2i/embedder.hpp"

#include <cmath>
#include <cstring>
#include <fstream>

#include "json.hpp"

namespace a2i {

namespace {

using nlohmann::json;

constexpr double kInvSqrt2   = 0.70710678118654752440;
constexpr double kInvSqrt2Pi = 0.39894228040143267794;

MatrixXd init_matrix(int rows, int cols, Rng& rng) {
    MatrixXd m(rows, cols);
    const double scale = 1.0 / std::sqrt(static_cast<double>(cols));
    for (int c = 0; c < cols; ++c)
        for (int r = 0; r < rows; ++r) m(r, c) = scale * rng.normal();
    return m;
}

}  // namespace

double gelu(double x) {
    return 0.5 * x * (1.0 + std::erf(x * kInvSqrt2));
}

double gelu_derivative(double x) {
    const double cdf = 0.5 * (1.0 + std::erf(x * kInvSqrt2));
    const double pdf = kInvSqrt2Pi * std::exp(-0.5 * x * x);
    return cdf + x * pdf;
}

EmbedderParams EmbedderParams::init(const EmbedderConfig& cfg, Rng& rng) {
    EmbedderParams p;
    p.w1     = init_matrix(cfg.d_feat, cfg.d_feat, rng);
    p.b1     = VectorXd::Zero(cfg.d_feat);
    p.w2     = init_matrix(cfg.d_token, cfg.d_feat, rng);
    p.b2     = VectorXd::Zero(cfg.d_token);
    p.pool_w = init_matrix(cfg.d_token, cfg.d_token, rng);
    p.pool_v = init_matrix(cfg.d_token, 1, rng).col(0);
    return p;
}

EmbedderParams EmbedderParams::zeros_like(const EmbedderParams& o) {
    EmbedderParams p;
    p.w1     = MatrixXd::Zero(o.w1.rows(), o.w1.cols());
    p.b1     = VectorXd::Zero(o.b1.size());
    p.w2     = MatrixXd::Zero(o.w2.rows(), o.w2.cols());
    p.b2     = VectorXd::Zero(o.b2.size());
    p.pool_w = MatrixXd::Zero(o.pool_w.rows(), o.pool_w.cols());
    p.pool_v = VectorXd::Zero(o.pool_v.size());
    return p;
}

std::int64_t embedder_param_count(int d_feat, int d_token) {
    const std::int64_t df = d_feat, dt = d_token;
    return df * df + df       // w1 + b1
         + dt * df + dt       // w2 + b2
         + dt * dt + dt;      // pool_w + pool_v
}

std::int64_t EmbedderParams::count() const {
    return w1.size() + b1.size() + w2.size() + b2.size() + pool_w.size() + pool_v.size();
}

std::uint64_t EmbedderParams::checksum() const {
    std::uint64_t h = a2i::checksum(w1);
    h = a2i::checksum(b1, h);
    h = a2i::checksum(w2, h);
    h = a2i::checksum(b2, h);
    h = a2i::checksum(pool_w, h);
    h = a2i::checksum(pool_v, h);
    return h;
}

EmbedderGrads EmbedderGrads::zero(const EmbedderParams& p) {
    EmbedderGrads g;
    g.w1     = MatrixXd::Zero(p.w1.rows(), p.w1.cols());
    g.b1     = VectorXd::Zero(p.b1.size());
    g.w2     = MatrixXd::Zero(p.w2.rows(), p.w2.cols());
    g.b2     = VectorXd::Zero(p.b2.size());
    g.pool_w = MatrixXd::Zero(p.pool_w.rows(), p.pool_w.cols());
    g.pool_v = VectorXd::Zero(p.pool_v.size());
    return g;
}

void EmbedderGrads::accumulate(const EmbedderGrads& o, double weight) {
    w1 += weight * o.w1;
    b1 += weight * o.b1;
    w2 += weight * o.w2;
    b2 += weight * o.b2;
    pool_w += weight * o.pool_w;
    pool_v += weight * o.pool_v;
}

AudioFeatures extract_features(const HiddenStateStack& stack, const std::vector<int>& indices) {
    stack.validate();
    if (indices.empty()) fail("extract_features: no layer indices");
    for (std::size_t i = 0; i < indices.size(); ++i) {
        if (indices[i] < 1 || indices[i] > stack.layer_count())
            fail("extract_features: layer index " + std::to_string(indices[i]) +
                 " out of range 1.." + std::to_string(stack.layer_count()));
        if (i > 0 && indices[i] <= indices[i - 1])
            fail("extract_features: layer indices must be strictly increasing (duplicate or "
                 "unordered index " + std::to_string(indices[i]) + ")");
    }
    const int h   = stack.hidden_width();
    const int n_a = stack.frames();
    AudioFeatures f;
    f.source_layer_indices = indices;
    f.values.resize(static_cast<int>(indices.size()) * h, n_a);
    for (std::size_t i = 0; i < indices.size(); ++i)
        f.values.middleRows(static_cast<int>(i) * h, h) =
            stack.layers[indices[i] - 1].transpose();
    return f;
}

ProjectedSequence project(const AudioFeatures& features, const EmbedderParams& params) {
    if (features.values.rows() != params.w1.cols())
        fail("project: feature width " + std::to_string(features.values.rows()) +
             " does not match w1 (" + std::to_string(params.w1.cols()) + ")");
    MatrixXd h = params.w1 * features.values;
    h.colwise() += params.b1;
    const MatrixXd g = h.unaryExpr([](double x) { return gelu(x); });
    ProjectedSequence out;
    out.values = params.w2 * g;
    out.values.colwise() += params.b2;
    return out;
}

AudioToken attentive_pool(const ProjectedSequence& seq, const EmbedderParams& params) {
    const int n_a = static_cast<int>(seq.values.cols());
    if (n_a < 1) fail("attentive_pool: empty sequence");
    if (seq.values.rows() != params.pool_w.cols())
        fail("attentive_pool: sequence width does not match pooling parameters");

    const MatrixXd u = (params.pool_w * seq.values).array().tanh().matrix();
    VectorXd scores  = u.transpose() * params.pool_v;
    const double m   = scores.maxCoeff();
    VectorXd weights = (scores.array() - m).exp().matrix();
    weights /= weights.sum();

    AudioToken token;
    token.values          = seq.values * weights;
    token.pooling_weights = weights;
    return token;
}

AudioToken embed_audio(const AudioWaveform& wave, const AudioEncoder& encoder,
                       const EmbedderParams& params, const std::vector<int>& indices) {
    const HiddenStateStack stack = encoder.hidden_states(wave);
    const AudioFeatures features = extract_features(stack, indices);
    return attentive_pool(project(features, params), params);
}

EmbedderTrace embed_forward(const MatrixXd& features, const EmbedderParams& params) {
    EmbedderTrace t;
    t.features = features;
    t.pre1     = params.w1 * features;
    t.pre1.colwise() += params.b1;
    t.act1      = t.pre1.unaryExpr([](double x) { return gelu(x); });
    t.projected = params.w2 * t.act1;
    t.projected.colwise() += params.b2;
    t.pool_pre  = params.pool_w * t.projected;
    t.pool_tanh = t.pool_pre.array().tanh().matrix();
    t.scores    = t.pool_tanh.transpose() * params.pool_v;
    const double m = t.scores.maxCoeff();
    t.weights      = (t.scores.array() - m).exp().matrix();
    t.weights /= t.weights.sum();
    t.token = t.projected * t.weights;
    return t;
}

void embed_backward(const EmbedderTrace& t, const EmbedderParams& params,
                    const VectorXd& d_token, EmbedderGrads& grads) {
    // token = P alpha
    VectorXd d_alpha = t.projected.transpose() * d_token;
    MatrixXd d_proj  = d_token * t.weights.transpose();

    // alpha = softmax(s)
    const double dot = t.weights.dot(d_alpha);
    const VectorXd d_scores = (t.weights.array() * (d_alpha.array() - dot)).matrix();

    // s_t = pool_v . tanh(pool_w p_t)
    grads.pool_v += t.pool_tanh * d_scores;
    const MatrixXd d_pre =
        ((1.0 - t.pool_tanh.array().square()) *
         (params.pool_v * d_scores.transpose()).array())
            .matrix();
    grads.pool_w += d_pre * t.projected.transpose();
    d_proj += params.pool_w.transpose() * d_pre;

    // P = w2 G + b2
    grads.w2 += d_proj * t.act1.transpose();
    grads.b2 += d_proj.rowwise().sum();
    const MatrixXd d_act = params.w2.transpose() * d_proj;

    // G = gelu(H), H = w1 F + b1
    const MatrixXd d_pre1 =
        (t.pre1.unaryExpr([](double x) { return gelu_derivative(x); }).array() * d_act.array())
            .matrix();
    grads.w1 += d_pre1 * t.features.transpose();
    grads.b1 += d_pre1.rowwise().sum();
}

// ---------------------------------------------------------------------------
// Checkpoint IO
// ---------------------------------------------------------------------------

namespace {

constexpr char kCheckpointMagic[8] = {'A', '2', 'I', 'C', 'K', '0', '0', '1'};

void write_block(std::ostream& os, const MatrixXd& m) {
    const std::uint32_t r = static_cast<std::uint32_t>(m.rows());
    const std::uint32_t c = static_cast<std::uint32_t>(m.cols());
    os.write(reinterpret_cast<const char*>(&r), 4);
    os.write(reinterpret_cast<const char*>(&c), 4);
    os.write(reinterpret_cast<const char*>(m.data()),
             static_cast<std::streamsize>(sizeof(double) * m.size()));
}

MatrixXd read_block(std::istream& is) {
    std::uint32_t r = 0, c = 0;
    is.read(reinterpret_cast<char*>(&r), 4);
    is.read(reinterpret_cast<char*>(&c), 4);
    if (!is) fail("checkpoint: truncated block header");
    MatrixXd m(r, c);
    is.read(reinterpret_cast<char*>(m.data()),
            static_cast<std::streamsize>(sizeof(double) * m.size()));
    if (!is) fail("checkpoint: truncated block data");
    return m;
}

void write_param_set(std::ostream& os, const MatrixXd& w1, const VectorXd& b1, const MatrixXd& w2,
                     const VectorXd& b2, const MatrixXd& pw, const VectorXd& pv) {
    write_block(os, w1);
    write_block(os, b1);
    write_block(os, w2);
    write_block(os, b2);
    write_block(os, pw);
    write_block(os, pv);
}

template <typename T>
void read_param_set(std::istream& is, T& out) {
    out.w1     = read_block(is);
    out.b1     = read_block(is).col(0);
    out.w2     = read_block(is);
    out.b2     = read_block(is).col(0);
    out.pool_w = read_block(is);
    out.pool_v = read_block(is).col(0);
}

}  // namespace

void save_checkpoint(const Checkpoint& ckpt, const std::filesystem::path& path) {
    std::ofstream os(path, std::ios::binary | std::ios::trunc);
    if (!os) fail("cannot write checkpoint: " + path.string());

    const std::string header = json{{"version", 1},
                                    {"d_feat", ckpt.config.d_feat},
                                    {"d_token", ckpt.config.d_token},
                                    {"layer_indices", ckpt.config.layer_indices},
                                    {"config_fingerprint", ckpt.config_fingerprint},
                                    {"step", ckpt.step},
                                    {"has_optimizer_state", ckpt.has_optimizer_state},
                                    {"param_count", ckpt.params.count()}}
                                   .dump();
    os.write(kCheckpointMagic, 8);
    const std::uint32_t len = static_cast<std::uint32_t>(header.size());
    os.write(reinterpret_cast<const char*>(&len), 4);
    os.write(header.data(), len);

    write_param_set(os, ckpt.params.w1, ckpt.params.b1, ckpt.params.w2, ckpt.params.b2,
                    ckpt.params.pool_w, ckpt.params.pool_v);
    if (ckpt.has_optimizer_state) {
        write_param_set(os, ckpt.adam_m.w1, ckpt.adam_m.b1, ckpt.adam_m.w2, ckpt.adam_m.b2,
                        ckpt.adam_m.pool_w, ckpt.adam_m.pool_v);
        write_param_set(os, ckpt.adam_v.w1, ckpt.adam_v.b1, ckpt.adam_v.w2, ckpt.adam_v.b2,
                        ckpt.adam_v.pool_w, ckpt.adam_v.pool_v);
    }
    if (!os) fail("short write on checkpoint: " + path.string());
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) fail("cannot open checkpoint: " + path.string());
    char magic[8];
    is.read(magic, 8);
    if (!is || std::memcmp(magic, kCheckpointMagic, 8) != 0)
        fail("not a checkpoint file: " + path.string());
    std::uint32_t len = 0;
    is.read(reinterpret_cast<char*>(&len), 4);
    std::string header(len, '\0');
    is.read(header.data(), len);
    if (!is) fail("truncated checkpoint header: " + path.string());

    const json j = json::parse(header);
    if (j.at("version") != 1) fail("unsupported checkpoint version");

    Checkpoint ckpt;
    ckpt.config.d_feat        = j.at("d_feat");
    ckpt.config.d_token       = j.at("d_token");
    ckpt.config.layer_indices = j.at("layer_indices").get<std::vector<int>>();
    ckpt.config_fingerprint   = j.at("config_fingerprint");
    ckpt.step                 = j.at("step");
    ckpt.has_optimizer_state  = j.at("has_optimizer_state");

    read_param_set(is, ckpt.params);
    if (ckpt.has_optimizer_state) {
        read_param_set(is, ckpt.adam_m);
        read_param_set(is, ckpt.adam_v);
    }
    return ckpt;
}

}  // namespace a2i
