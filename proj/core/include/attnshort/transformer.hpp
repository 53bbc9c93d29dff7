#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>
#include <string>
#include <vector>

#include "attnshort/matrix.hpp"
#include "attnshort/rng.hpp"
#include "attnshort/vocab.hpp"

namespace attnshort {

struct EncoderConfig {
    int num_layers = 4;
    int num_heads = 4;
    int model_dim = 64;
    int ff_dim = 256;
    int vocab_size = 0;
    int max_len = 128;
    int num_classes = 2;
    double dropout = 0.0;
    uint64_t seed = 1;

    int head_dim() const { return model_dim / num_heads; }

    void validate() const {
        if (num_layers < 1 || num_heads < 1 || model_dim < 1 || ff_dim < 1 || max_len < 1 ||
            vocab_size < 1 || num_classes < 1)
            throw std::invalid_argument("EncoderConfig: all dimensions must be >= 1");
        if (model_dim % num_heads != 0)
            throw std::invalid_argument("EncoderConfig: model_dim must be divisible by num_heads");
        if (dropout < 0.0 || dropout >= 1.0)
            throw std::invalid_argument("EncoderConfig: dropout must be in [0, 1)");
    }
};

enum class ModelKind { kEncoder, kCausalLm };

/// Per-layer, per-head post-softmax attention weights for one sequence.
/// Unmasked rows are probability distributions; rows and columns at or past
/// valid_len (trailing PAD) are exactly zero.
struct AttentionTensor {
    int layers = 0;
    int heads = 0;
    int n = 0;
    int valid_len = 0;
    std::vector<float> w;  // [layer][head][i][j]

    float at(int l, int h, int i, int j) const {
        return w[((static_cast<size_t>(l) * heads + h) * n + i) * n + j];
    }
    float& at(int l, int h, int i, int j) {
        return w[((static_cast<size_t>(l) * heads + h) * n + i) * n + j];
    }
};

template <typename T>
struct NamedParam {
    std::string name;
    Mat<T> value;
};

namespace detail {

constexpr double kLnEps = 1e-5;

template <typename T>
inline T gelu(T x) {
    return T(0.5) * x * (T(1) + T(std::erf(static_cast<double>(x) / 1.4142135623730951)));
}

template <typename T>
inline T gelu_grad(T x) {
    const double xd = static_cast<double>(x);
    const double cdf = 0.5 * (1.0 + std::erf(xd / 1.4142135623730951));
    const double pdf = std::exp(-0.5 * xd * xd) / 2.5066282746310002;  // sqrt(2*pi)
    return T(cdf + xd * pdf);
}

// y = gamma * (x - mu) * rstd + beta, row-wise; stats cached for backward
template <typename T>
void layer_norm(const Mat<T>& x, const Mat<T>& gamma, const Mat<T>& beta, Mat<T>& y,
                std::vector<T>& mu, std::vector<T>& rstd) {
    const int n = x.rows, dim = x.cols;
    mu.assign(n, T(0));
    rstd.assign(n, T(0));
    for (int i = 0; i < n; ++i) {
        const T* xi = x.row(i);
        T m = 0;
        for (int j = 0; j < dim; ++j) m += xi[j];
        m /= T(dim);
        T var = 0;
        for (int j = 0; j < dim; ++j) {
            T dxy = xi[j] - m;
            var += dxy * dxy;
        }
        var /= T(dim);
        T r = T(1) / std::sqrt(var + T(kLnEps));
        mu[i] = m;
        rstd[i] = r;
        T* yi = y.row(i);
        const T* g = gamma.row(0);
        const T* b = beta.row(0);
        for (int j = 0; j < dim; ++j) yi[j] = g[j] * (xi[j] - m) * r + b[j];
    }
}

// dy -> dx (accumulated), plus gamma/beta grads
template <typename T>
void layer_norm_backward(const Mat<T>& x, const Mat<T>& gamma, const std::vector<T>& mu,
                         const std::vector<T>& rstd, const Mat<T>& dy, Mat<T>& dx,
                         Mat<T>& dgamma, Mat<T>& dbeta) {
    const int n = x.rows, dim = x.cols;
    for (int i = 0; i < n; ++i) {
        const T* xi = x.row(i);
        const T* dyi = dy.row(i);
        const T* g = gamma.row(0);
        T* dgi = dgamma.row(0);
        T* dbi = dbeta.row(0);
        const T m = mu[i], r = rstd[i];

        T sum_dxhat = 0, sum_dxhat_xhat = 0;
        for (int j = 0; j < dim; ++j) {
            const T xhat = (xi[j] - m) * r;
            const T dxhat = dyi[j] * g[j];
            sum_dxhat += dxhat;
            sum_dxhat_xhat += dxhat * xhat;
            dgi[j] += dyi[j] * xhat;
            dbi[j] += dyi[j];
        }
        const T inv_dim = T(1) / T(dim);
        T* dxi = dx.row(i);
        for (int j = 0; j < dim; ++j) {
            const T xhat = (xi[j] - m) * r;
            const T dxhat = dyi[j] * g[j];
            dxi[j] += r * (dxhat - inv_dim * sum_dxhat - xhat * inv_dim * sum_dxhat_xhat);
        }
    }
}

template <typename T>
void add_bias_rows(Mat<T>& x, const Mat<T>& bias, int rows) {
    const T* b = bias.row(0);
    for (int i = 0; i < rows; ++i) {
        T* xi = x.row(i);
        for (int j = 0; j < x.cols; ++j) xi[j] += b[j];
    }
}

template <typename T>
void col_sums_acc(Mat<T>& acc, const Mat<T>& x) {
    T* out = acc.row(0);
    for (int i = 0; i < x.rows; ++i) {
        const T* xi = x.row(i);
        for (int j = 0; j < x.cols; ++j) out[j] += xi[j];
    }
}

}  // namespace detail

/// Transformer with pre-norm residual blocks and learned position
/// embeddings. Kind selects the attention mask and output head:
///   kEncoder:  bidirectional over valid positions, classifier head on CLS
///   kCausalLm: lower-triangular mask, LM head tied to token embeddings
template <typename T>
class Transformer {
public:
    struct LayerRefs {
        int ln1_g, ln1_b, wq, bq, wk, bk, wv, bv, wo, bo;
        int ln2_g, ln2_b, w1, b1, w2, b2;
    };

    struct LayerCache {
        int layer_index = -1;
        Mat<T> x_in, xn1, q, k, v, ctx, x2, xn2, h1, g1;
        std::vector<Mat<T>> attn;  // per head, n x n
        std::vector<T> mu1, rstd1, mu2, rstd2;
        Mat<T> drop_attn, drop_ff;  // inverted-dropout multipliers (training only)
    };

    struct Cache {
        std::vector<int> ids;
        int n = 0;
        int valid = 0;
        Mat<T> x0, x_pre_lnf, xf;
        std::vector<T> muf, rstdf;
        std::vector<LayerCache> layers;
    };

    Transformer(const EncoderConfig& cfg, ModelKind kind) : cfg_(cfg), kind_(kind) {
        cfg_.validate();
        const int d = cfg_.model_dim, f = cfg_.ff_dim;
        tok_emb_ = add_param("tok_emb", cfg_.vocab_size, d);
        pos_emb_ = add_param("pos_emb", cfg_.max_len, d);
        layers_.resize(cfg_.num_layers);
        for (int l = 0; l < cfg_.num_layers; ++l) {
            const std::string p = "layer" + std::to_string(l) + ".";
            LayerRefs& r = layers_[l];
            r.ln1_g = add_param(p + "ln1.gamma", 1, d);
            r.ln1_b = add_param(p + "ln1.beta", 1, d);
            r.wq = add_param(p + "wq", d, d);
            r.bq = add_param(p + "bq", 1, d);
            r.wk = add_param(p + "wk", d, d);
            r.bk = add_param(p + "bk", 1, d);
            r.wv = add_param(p + "wv", d, d);
            r.bv = add_param(p + "bv", 1, d);
            r.wo = add_param(p + "wo", d, d);
            r.bo = add_param(p + "bo", 1, d);
            r.ln2_g = add_param(p + "ln2.gamma", 1, d);
            r.ln2_b = add_param(p + "ln2.beta", 1, d);
            r.w1 = add_param(p + "ff.w1", d, f);
            r.b1 = add_param(p + "ff.b1", 1, f);
            r.w2 = add_param(p + "ff.w2", f, d);
            r.b2 = add_param(p + "ff.b2", 1, d);
        }
        lnf_g_ = add_param("lnf.gamma", 1, d);
        lnf_b_ = add_param("lnf.beta", 1, d);
        if (kind_ == ModelKind::kEncoder) {
            cls_w_ = add_param("cls.w", d, cfg_.num_classes);
            cls_b_ = add_param("cls.b", 1, cfg_.num_classes);
        }
        init_params();
    }

    const EncoderConfig& config() const { return cfg_; }
    ModelKind kind() const { return kind_; }

    const std::vector<NamedParam<T>>& named_params() const { return params_; }
    std::vector<NamedParam<T>>& named_params() { return params_; }

    size_t param_count() const {
        size_t total = 0;
        for (const auto& p : params_) total += p.value.count();
        return total;
    }

    std::vector<Mat<T>> make_grads() const {
        std::vector<Mat<T>> g;
        g.reserve(params_.size());
        for (const auto& p : params_) g.emplace_back(p.value.rows, p.value.cols);
        return g;
    }

    template <typename U>
    Transformer<U> cast() const {
        Transformer<U> out(cfg_, kind_);
        for (size_t i = 0; i < params_.size(); ++i)
            out.named_params()[i].value = params_[i].value.template cast<U>();
        return out;
    }

    /// Number of leading positions that are not trailing PAD.
    static int valid_length(const std::vector<int>& ids) {
        int v = static_cast<int>(ids.size());
        while (v > 0 && ids[v - 1] == Vocab::kPad) --v;
        return v;
    }

    void forward(const std::vector<int>& ids, Cache& c, Rng* dropout_rng = nullptr) const {
        const int n = static_cast<int>(ids.size());
        if (n == 0) throw std::invalid_argument("forward: empty sequence");
        if (n > cfg_.max_len) throw std::invalid_argument("forward: sequence longer than max_len");
        for (int id : ids)
            if (id < 0 || id >= cfg_.vocab_size)
                throw std::out_of_range("forward: token id out of range");

        const int d = cfg_.model_dim;
        c.ids = ids;
        c.n = n;
        c.valid = valid_length(ids);

        c.x0 = Mat<T>(n, d);
        const Mat<T>& te = p(tok_emb_);
        const Mat<T>& pe = p(pos_emb_);
        for (int i = 0; i < n; ++i) {
            const T* tr = te.row(ids[i]);
            const T* pr = pe.row(i);
            T* xr = c.x0.row(i);
            for (int j = 0; j < d; ++j) xr[j] = tr[j] + pr[j];
        }

        c.layers.assign(cfg_.num_layers, LayerCache{});
        Mat<T> x = c.x0;
        for (int l = 0; l < cfg_.num_layers; ++l) {
            layer_forward(l, x, c.layers[l], c.valid, dropout_rng);
            x = layer_output(c.layers[l]);
        }
        c.x_pre_lnf = std::move(x);
        c.xf = Mat<T>(n, d);
        detail::layer_norm(c.x_pre_lnf, p(lnf_g_), p(lnf_b_), c.xf, c.muf, c.rstdf);
    }

    /// Classifier logits from the CLS position. Encoder kind only.
    std::vector<T> class_logits(const Cache& c) const {
        require_kind(ModelKind::kEncoder);
        const int nc = cfg_.num_classes;
        std::vector<T> logits(nc, T(0));
        const Mat<T>& w = p(cls_w_);
        const T* x = c.xf.row(0);
        for (int j = 0; j < cfg_.model_dim; ++j) {
            const T xj = x[j];
            const T* wr = w.row(j);
            for (int cidx = 0; cidx < nc; ++cidx) logits[cidx] += xj * wr[cidx];
        }
        const T* b = p(cls_b_).row(0);
        for (int cidx = 0; cidx < nc; ++cidx) logits[cidx] += b[cidx];
        return logits;
    }

    /// Next-token logits at every position, tied to token embeddings.
    Mat<T> lm_logits(const Cache& c) const {
        require_kind(ModelKind::kCausalLm);
        Mat<T> logits(c.n, cfg_.vocab_size);
        matmul_bt_acc(logits, c.xf, p(tok_emb_));
        return logits;
    }

    AttentionTensor attention_tensor(const Cache& c) const {
        AttentionTensor t;
        t.layers = cfg_.num_layers;
        t.heads = cfg_.num_heads;
        t.n = c.n;
        t.valid_len = c.valid;
        t.w.assign(static_cast<size_t>(t.layers) * t.heads * t.n * t.n, 0.0f);
        for (int l = 0; l < t.layers; ++l)
            for (int h = 0; h < t.heads; ++h) {
                const Mat<T>& a = c.layers[l].attn[h];
                for (int i = 0; i < t.n; ++i)
                    for (int j = 0; j < t.n; ++j)
                        t.at(l, h, i, j) = static_cast<float>(a(i, j));
            }
        return t;
    }

    /// Cross-entropy of one example; grads accumulated with weight `scale`.
    T classifier_loss_grad(const std::vector<int>& ids, int label, std::vector<Mat<T>>& grads,
                           T scale, Rng* dropout_rng = nullptr, int* predicted = nullptr) const {
        require_kind(ModelKind::kEncoder);
        if (label < 0 || label >= cfg_.num_classes)
            throw std::out_of_range("classifier_loss_grad: label out of range");
        Cache c;
        forward(ids, c, dropout_rng);
        std::vector<T> logits = class_logits(c);
        if (predicted)
            *predicted = static_cast<int>(
                std::max_element(logits.begin(), logits.end()) - logits.begin());

        std::vector<T> probs = logits;
        const T loss = softmax_xent(probs, label);

        // d logits
        for (int j = 0; j < cfg_.num_classes; ++j) probs[j] *= scale;
        probs[label] -= scale;

        // head
        Mat<T> d_xf(c.n, cfg_.model_dim);
        {
            Mat<T>& dw = grads[cls_w_];
            Mat<T>& db = grads[cls_b_];
            const T* x0r = c.xf.row(0);
            const Mat<T>& w = p(cls_w_);
            T* dx0 = d_xf.row(0);
            for (int j = 0; j < cfg_.model_dim; ++j) {
                T acc = 0;
                T* dwr = dw.row(j);
                const T* wr = w.row(j);
                for (int k2 = 0; k2 < cfg_.num_classes; ++k2) {
                    dwr[k2] += x0r[j] * probs[k2];
                    acc += wr[k2] * probs[k2];
                }
                dx0[j] = acc;
            }
            T* dbr = db.row(0);
            for (int k2 = 0; k2 < cfg_.num_classes; ++k2) dbr[k2] += probs[k2];
        }
        backward_from_dxf(c, d_xf, grads);
        return loss;
    }

    /// Summed next-token cross-entropy over positions [0, valid-2]; grads
    /// accumulated with weight `scale` per position. n_positions reports how
    /// many positions contributed.
    T lm_loss_grad(const std::vector<int>& ids, std::vector<Mat<T>>& grads, T scale,
                   int* n_positions = nullptr, Rng* dropout_rng = nullptr,
                   int* n_correct = nullptr) const {
        require_kind(ModelKind::kCausalLm);
        Cache c;
        forward(ids, c, dropout_rng);
        const int pred = std::max(0, c.valid - 1);
        if (n_positions) *n_positions = pred;
        if (n_correct) *n_correct = 0;
        if (pred == 0) return T(0);

        Mat<T> logits = lm_logits(c);
        Mat<T> dlogits(c.n, cfg_.vocab_size);
        T loss = 0;
        for (int t = 0; t < pred; ++t) {
            std::vector<T> row(logits.row(t), logits.row(t) + cfg_.vocab_size);
            if (n_correct) {
                const int am = static_cast<int>(std::max_element(row.begin(), row.end()) -
                                                row.begin());
                if (am == ids[t + 1]) ++*n_correct;
            }
            loss += softmax_xent(row, ids[t + 1]);
            T* dr = dlogits.row(t);
            for (int j = 0; j < cfg_.vocab_size; ++j) dr[j] = row[j] * scale;
            dr[ids[t + 1]] -= scale;
        }

        // tied head: logits = xf * E^T
        Mat<T> d_xf(c.n, cfg_.model_dim);
        matmul_acc(d_xf, dlogits, p(tok_emb_));
        matmul_at_acc(grads[tok_emb_], dlogits, c.xf);
        backward_from_dxf(c, d_xf, grads);
        return loss;
    }

    T classifier_loss(const std::vector<int>& ids, int label) const {
        require_kind(ModelKind::kEncoder);
        Cache c;
        forward(ids, c);
        std::vector<T> logits = class_logits(c);
        return softmax_xent(logits, label);
    }

    T lm_loss(const std::vector<int>& ids) const {
        require_kind(ModelKind::kCausalLm);
        Cache c;
        forward(ids, c);
        const int pred = std::max(0, c.valid - 1);
        if (pred == 0) return T(0);
        Mat<T> logits = lm_logits(c);
        T loss = 0;
        for (int t = 0; t < pred; ++t) {
            std::vector<T> row(logits.row(t), logits.row(t) + cfg_.vocab_size);
            loss += softmax_xent(row, ids[t + 1]);
        }
        return loss;
    }

    // parameter access by registration index (checkpoint / optimizer use)
    const Mat<T>& p(int idx) const { return params_[idx].value; }
    Mat<T>& p(int idx) { return params_[idx].value; }
    int tok_emb_idx() const { return tok_emb_; }

private:
    template <typename U>
    friend class Transformer;

    int add_param(const std::string& name, int rows, int cols) {
        params_.push_back({name, Mat<T>(rows, cols)});
        return static_cast<int>(params_.size()) - 1;
    }

    void init_params() {
        Rng rng(cfg_.seed);
        const double std_dev = 0.02;
        for (auto& np : params_) {
            const std::string& name = np.name;
            const bool is_gamma = name.size() >= 5 && name.rfind("gamma") == name.size() - 5;
            const bool is_beta = name.size() >= 4 && name.rfind("beta") == name.size() - 4;
            const bool is_bias =
                np.value.rows == 1 && !is_gamma && !is_beta;  // b* vectors stay zero
            if (is_gamma) {
                std::fill(np.value.a.begin(), np.value.a.end(), T(1));
            } else if (is_beta || is_bias) {
                np.value.zero();
            } else {
                for (auto& x : np.value.a) x = T(rng.normal(0.0, std_dev));
            }
        }
    }

    void require_kind(ModelKind k) const {
        if (kind_ != k) throw std::logic_error("transformer: wrong model kind for this head");
    }

    // stable softmax cross-entropy; logits are replaced by probabilities
    static T softmax_xent(std::vector<T>& logits, int target) {
        T mx = logits[0];
        for (T v : logits) mx = std::max(mx, v);
        T denom = 0;
        for (T& v : logits) {
            v = std::exp(v - mx);
            denom += v;
        }
        const T inv = T(1) / denom;
        for (T& v : logits) v *= inv;
        return -std::log(std::max(logits[target], std::numeric_limits<T>::min()));
    }

    Mat<T> layer_output(const LayerCache& lc) const {
        // x_out = x2 + drop(ff_out); recomputed cheaply from cached g1
        const LayerRefs& r = layers_[lc.layer_index];
        const int n = lc.x2.rows, d = cfg_.model_dim;
        Mat<T> out(n, d);
        matmul_acc(out, lc.g1, p(r.w2));
        detail::add_bias_rows(out, p(r.b2), n);
        if (lc.drop_ff.rows > 0)
            for (size_t i = 0; i < out.a.size(); ++i) out.a[i] *= lc.drop_ff.a[i];
        for (size_t i = 0; i < out.a.size(); ++i) out.a[i] += lc.x2.a[i];
        return out;
    }

    void layer_forward(int l, const Mat<T>& x_in, LayerCache& lc, int valid,
                       Rng* dropout_rng) const {
        const LayerRefs& r = layers_[l];
        const int n = x_in.rows, d = cfg_.model_dim, f = cfg_.ff_dim;
        const int nh = cfg_.num_heads, hd = cfg_.head_dim();
        lc.layer_index = l;

        lc.x_in = x_in;
        lc.xn1 = Mat<T>(n, d);
        detail::layer_norm(x_in, p(r.ln1_g), p(r.ln1_b), lc.xn1, lc.mu1, lc.rstd1);

        lc.q = Mat<T>(n, d);
        matmul_acc(lc.q, lc.xn1, p(r.wq));
        detail::add_bias_rows(lc.q, p(r.bq), n);
        lc.k = Mat<T>(n, d);
        matmul_acc(lc.k, lc.xn1, p(r.wk));
        detail::add_bias_rows(lc.k, p(r.bk), n);
        lc.v = Mat<T>(n, d);
        matmul_acc(lc.v, lc.xn1, p(r.wv));
        detail::add_bias_rows(lc.v, p(r.bv), n);

        const bool causal = kind_ == ModelKind::kCausalLm;
        const T inv_sqrt_d = T(1) / std::sqrt(T(hd));
        lc.attn.assign(nh, Mat<T>(n, n));
        lc.ctx = Mat<T>(n, d);
        std::vector<T> scores(n);
        for (int h = 0; h < nh; ++h) {
            const int off = h * hd;
            Mat<T>& a = lc.attn[h];
            for (int i = 0; i < valid; ++i) {
                const int jmax = causal ? i + 1 : valid;
                const T* qi = lc.q.row(i) + off;
                T mx = -std::numeric_limits<T>::infinity();
                for (int j = 0; j < jmax; ++j) {
                    const T* kj = lc.k.row(j) + off;
                    T s = 0;
                    for (int cdim = 0; cdim < hd; ++cdim) s += qi[cdim] * kj[cdim];
                    s *= inv_sqrt_d;
                    scores[j] = s;
                    mx = std::max(mx, s);
                }
                T denom = 0;
                T* ar = a.row(i);
                for (int j = 0; j < jmax; ++j) {
                    const T e = std::exp(scores[j] - mx);
                    ar[j] = e;
                    denom += e;
                }
                const T inv = T(1) / denom;
                T* ci = lc.ctx.row(i) + off;
                for (int j = 0; j < jmax; ++j) {
                    ar[j] *= inv;
                    const T wgt = ar[j];
                    const T* vj = lc.v.row(j) + off;
                    for (int cdim = 0; cdim < hd; ++cdim) ci[cdim] += wgt * vj[cdim];
                }
            }
        }

        Mat<T> attn_out(n, d);
        matmul_acc(attn_out, lc.ctx, p(r.wo));
        detail::add_bias_rows(attn_out, p(r.bo), n);
        if (dropout_rng && cfg_.dropout > 0.0) {
            lc.drop_attn = make_dropout_mask(n, d, *dropout_rng);
            for (size_t i = 0; i < attn_out.a.size(); ++i) attn_out.a[i] *= lc.drop_attn.a[i];
        }

        lc.x2 = x_in;
        for (size_t i = 0; i < lc.x2.a.size(); ++i) lc.x2.a[i] += attn_out.a[i];

        lc.xn2 = Mat<T>(n, d);
        detail::layer_norm(lc.x2, p(r.ln2_g), p(r.ln2_b), lc.xn2, lc.mu2, lc.rstd2);

        lc.h1 = Mat<T>(n, f);
        matmul_acc(lc.h1, lc.xn2, p(r.w1));
        detail::add_bias_rows(lc.h1, p(r.b1), n);
        lc.g1 = Mat<T>(n, f);
        for (size_t i = 0; i < lc.h1.a.size(); ++i) lc.g1.a[i] = detail::gelu(lc.h1.a[i]);

        if (dropout_rng && cfg_.dropout > 0.0) lc.drop_ff = make_dropout_mask(n, d, *dropout_rng);
    }

    Mat<T> make_dropout_mask(int n, int d, Rng& rng) const {
        Mat<T> m(n, d);
        const T keep_scale = T(1.0 / (1.0 - cfg_.dropout));
        for (auto& x : m.a) x = rng.uniform() < cfg_.dropout ? T(0) : keep_scale;
        return m;
    }

    void backward_from_dxf(const Cache& c, Mat<T>& d_xf, std::vector<Mat<T>>& grads) const {
        const int n = c.n, d = cfg_.model_dim;
        const int nh = cfg_.num_heads, hd = cfg_.head_dim();
        const bool causal = kind_ == ModelKind::kCausalLm;
        const T inv_sqrt_d = T(1) / std::sqrt(T(hd));

        Mat<T> d_x(n, d);
        detail::layer_norm_backward(c.x_pre_lnf, p(lnf_g_), c.muf, c.rstdf, d_xf, d_x,
                                    grads[lnf_g_], grads[lnf_b_]);

        for (int l = cfg_.num_layers - 1; l >= 0; --l) {
            const LayerRefs& r = layers_[l];
            const LayerCache& lc = c.layers[l];

            // feed-forward branch: x_out = x2 + drop(gelu(xn2 W1 + b1) W2 + b2)
            Mat<T> d_ff = d_x;
            if (lc.drop_ff.rows > 0)
                for (size_t i = 0; i < d_ff.a.size(); ++i) d_ff.a[i] *= lc.drop_ff.a[i];

            Mat<T> d_g1(n, cfg_.ff_dim);
            matmul_bt_acc(d_g1, d_ff, p(r.w2));
            matmul_at_acc(grads[r.w2], lc.g1, d_ff);
            detail::col_sums_acc(grads[r.b2], d_ff);

            Mat<T>& d_h1 = d_g1;
            for (size_t i = 0; i < d_h1.a.size(); ++i)
                d_h1.a[i] *= detail::gelu_grad(lc.h1.a[i]);

            Mat<T> d_xn2(n, d);
            matmul_bt_acc(d_xn2, d_h1, p(r.w1));
            matmul_at_acc(grads[r.w1], lc.xn2, d_h1);
            detail::col_sums_acc(grads[r.b1], d_h1);

            Mat<T> d_x2 = d_x;  // residual
            detail::layer_norm_backward(lc.x2, p(r.ln2_g), lc.mu2, lc.rstd2, d_xn2, d_x2,
                                        grads[r.ln2_g], grads[r.ln2_b]);

            // attention branch: x2 = x_in + drop(ctx Wo + bo)
            Mat<T> d_attn_out = d_x2;
            if (lc.drop_attn.rows > 0)
                for (size_t i = 0; i < d_attn_out.a.size(); ++i)
                    d_attn_out.a[i] *= lc.drop_attn.a[i];

            Mat<T> d_ctx(n, d);
            matmul_bt_acc(d_ctx, d_attn_out, p(r.wo));
            matmul_at_acc(grads[r.wo], lc.ctx, d_attn_out);
            detail::col_sums_acc(grads[r.bo], d_attn_out);

            Mat<T> d_q(n, d), d_k(n, d), d_v(n, d);
            std::vector<T> da_row(n);
            for (int h = 0; h < nh; ++h) {
                const int off = h * hd;
                const Mat<T>& a = lc.attn[h];
                for (int i = 0; i < c.valid; ++i) {
                    const int jmax = causal ? i + 1 : c.valid;
                    const T* dci = d_ctx.row(i) + off;
                    const T* ar = a.row(i);

                    T sdot = 0;
                    for (int j = 0; j < jmax; ++j) {
                        const T* vj = lc.v.row(j) + off;
                        T s = 0;
                        for (int cdim = 0; cdim < hd; ++cdim) s += dci[cdim] * vj[cdim];
                        da_row[j] = s;
                        sdot += ar[j] * s;
                    }
                    const T* qi = lc.q.row(i) + off;
                    T* dqi = d_q.row(i) + off;
                    for (int j = 0; j < jmax; ++j) {
                        const T w = ar[j];
                        if (w == T(0)) continue;
                        const T ds = w * (da_row[j] - sdot) * inv_sqrt_d;
                        const T* kj = lc.k.row(j) + off;
                        T* dkj = d_k.row(j) + off;
                        T* dvj = d_v.row(j) + off;
                        for (int cdim = 0; cdim < hd; ++cdim) {
                            dqi[cdim] += ds * kj[cdim];
                            dkj[cdim] += ds * qi[cdim];
                            dvj[cdim] += w * dci[cdim];
                        }
                    }
                }
            }

            Mat<T> d_xn1(n, d);
            matmul_bt_acc(d_xn1, d_q, p(r.wq));
            matmul_at_acc(grads[r.wq], lc.xn1, d_q);
            detail::col_sums_acc(grads[r.bq], d_q);
            matmul_bt_acc(d_xn1, d_k, p(r.wk));
            matmul_at_acc(grads[r.wk], lc.xn1, d_k);
            detail::col_sums_acc(grads[r.bk], d_k);
            matmul_bt_acc(d_xn1, d_v, p(r.wv));
            matmul_at_acc(grads[r.wv], lc.xn1, d_v);
            detail::col_sums_acc(grads[r.bv], d_v);

            Mat<T> d_x_in = d_x2;  // residual
            detail::layer_norm_backward(lc.x_in, p(r.ln1_g), lc.mu1, lc.rstd1, d_xn1, d_x_in,
                                        grads[r.ln1_g], grads[r.ln1_b]);
            d_x = std::move(d_x_in);
        }

        // embeddings
        Mat<T>& d_tok = grads[tok_emb_];
        Mat<T>& d_pos = grads[pos_emb_];
        for (int i = 0; i < n; ++i) {
            const T* dxi = d_x.row(i);
            T* dt = d_tok.row(c.ids[i]);
            T* dp = d_pos.row(i);
            for (int j = 0; j < d; ++j) {
                dt[j] += dxi[j];
                dp[j] += dxi[j];
            }
        }
    }

    EncoderConfig cfg_;
    ModelKind kind_;
    std::vector<NamedParam<T>> params_;
    int tok_emb_ = -1, pos_emb_ = -1, lnf_g_ = -1, lnf_b_ = -1, cls_w_ = -1, cls_b_ = -1;
    std::vector<LayerRefs> layers_;
};

}  // namespace attnshort
