#include "driftlab/learners.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <utility>

namespace driftlab {

namespace {

void require(bool ok, const char* msg) {
    if (!ok) throw std::invalid_argument(msg);
}

void check_train_data(const Dataset& data) {
    require(data.n > 0 && data.d > 0, "training data is empty");
    require(static_cast<long long>(data.x.size()) == data.n * data.d &&
                static_cast<long long>(data.y.size()) == data.n,
            "dataset buffers inconsistent with (n, d)");
    bool pos = false, neg = false;
    for (int y : data.y) {
        require(y == 1 || y == -1, "labels must be in {-1,+1}");
        if (y == 1) pos = true;
        else neg = true;
    }
    require(pos && neg, "training data must contain both labels");
}

double dot(const double* a, const double* b, long long d) {
    double s = 0.0;
    for (long long j = 0; j < d; ++j) s += a[j] * b[j];
    return s;
}

// sigmoid(-t) evaluated stably
double sigmoid_neg(double t) {
    if (t >= 0.0) {
        double e = std::exp(-t);
        return e / (1.0 + e);
    }
    return 1.0 / (1.0 + std::exp(t));
}

double log1p_exp_neg(double t) {
    // log(1 + exp(-t)) without overflow
    return t >= 0.0 ? std::log1p(std::exp(-t)) : -t + std::log1p(std::exp(t));
}

// Largest eigenvalue of X'X by power iteration (with a little headroom);
// bounds the curvature of the logistic data term by lambda_max/4.
double data_lipschitz(const Dataset& data) {
    long long n = data.n, d = data.d;
    std::vector<double> v(static_cast<std::size_t>(d));
    for (long long j = 0; j < d; ++j)
        v[static_cast<std::size_t>(j)] =
            static_cast<double>(detail::splitmix64(static_cast<std::uint64_t>(j) + 11) >> 11) *
                0x1.0p-53 - 0.5;
    std::vector<double> u(static_cast<std::size_t>(n));
    double lam = 0.0;
    for (int it = 0; it < 30; ++it) {
        for (long long i = 0; i < n; ++i) u[static_cast<std::size_t>(i)] = dot(data.row(i), v.data(), d);
        std::vector<double> w(static_cast<std::size_t>(d), 0.0);
        for (long long i = 0; i < n; ++i) {
            double ui = u[static_cast<std::size_t>(i)];
            const double* row = data.row(i);
            for (long long j = 0; j < d; ++j) w[static_cast<std::size_t>(j)] += ui * row[j];
        }
        double nw = std::sqrt(dot(w.data(), w.data(), d));
        if (nw == 0.0) return 1e-12;
        lam = nw; // |X'X v| with |v| = 1
        for (long long j = 0; j < d; ++j) v[static_cast<std::size_t>(j)] = w[static_cast<std::size_t>(j)] / nw;
    }
    return 1.05 * std::fmax(lam, 1e-12);
}

struct LogisticWork {
    const Dataset& data;
    double lambda; // 1/C

    // margins t_i = y_i * theta.x_i into t; returns sum of losses
    double margins(const std::vector<double>& theta, std::vector<double>& t) const {
        double loss = 0.0;
        for (long long i = 0; i < data.n; ++i) {
            double ti = data.y[static_cast<std::size_t>(i)] * dot(data.row(i), theta.data(), data.d);
            t[static_cast<std::size_t>(i)] = ti;
            loss += log1p_exp_neg(ti);
        }
        return loss;
    }

    // gradient of the data term at theta, margins already in t
    void data_grad(const std::vector<double>& t, std::vector<double>& g) const {
        std::fill(g.begin(), g.end(), 0.0);
        for (long long i = 0; i < data.n; ++i) {
            double coef = -data.y[static_cast<std::size_t>(i)] * sigmoid_neg(t[static_cast<std::size_t>(i)]);
            const double* row = data.row(i);
            for (long long j = 0; j < data.d; ++j) g[static_cast<std::size_t>(j)] += coef * row[j];
        }
    }

    // duality gap for the L1 problem at theta (margins in t):
    // scale the natural dual point into the feasible box, evaluate the
    // Fenchel conjugate sum nu*ln(nu) + (1-nu)*ln(1-nu).
    double l1_duality_gap(const std::vector<double>& theta, const std::vector<double>& t,
                          double* primal_out) const {
        long long n = data.n, d = data.d;
        std::vector<double> nu(static_cast<std::size_t>(n));
        for (long long i = 0; i < n; ++i) nu[static_cast<std::size_t>(i)] = sigmoid_neg(t[static_cast<std::size_t>(i)]);
        std::vector<double> corr(static_cast<std::size_t>(d), 0.0);
        for (long long i = 0; i < n; ++i) {
            double c = nu[static_cast<std::size_t>(i)] * data.y[static_cast<std::size_t>(i)];
            const double* row = data.row(i);
            for (long long j = 0; j < d; ++j) corr[static_cast<std::size_t>(j)] += c * row[j];
        }
        double inf = 0.0;
        for (double c : corr) inf = std::fmax(inf, std::fabs(c));
        double scale = inf > lambda ? lambda / inf : 1.0;
        double dual = 0.0;
        for (long long i = 0; i < n; ++i) {
            double v = scale * nu[static_cast<std::size_t>(i)];
            double ent = 0.0;
            if (v > 0.0) ent += v * std::log(v);
            if (v < 1.0) ent += (1.0 - v) * std::log1p(-v);
            dual -= ent;
        }
        double l1 = 0.0;
        for (double th : theta) l1 += std::fabs(th);
        double primal = lambda * l1;
        for (long long i = 0; i < n; ++i) primal += log1p_exp_neg(t[static_cast<std::size_t>(i)]);
        if (primal_out) *primal_out = primal;
        return primal - dual;
    }
};

// Proximal gradient with Nesterov momentum, gradient-based adaptive restart,
// and backtracking on the smooth part.  The penalty enters only through its
// proximal map, so one loop serves both the L1 and L2 problems; the spectral
// estimate from data_lipschitz is just the starting step size and backtracking
// repairs any underestimate.
LinearClassifier solve_logistic(const Dataset& data, const LogisticOptions& opt) {
    long long d = data.d, n = data.n;
    bool l1 = opt.penalty == Penalty::L1;
    double lambda = 1.0 / opt.C;
    LogisticWork work{data, lambda};
    double lips = std::fmax(0.25 * data_lipschitz(data), 1e-12);

    std::vector<double> theta(static_cast<std::size_t>(d), 0.0);
    if (opt.warm_start) {
        require(opt.warm_start->size() == static_cast<std::size_t>(d),
                "warm start has wrong dimension");
        theta = *opt.warm_start;
    }
    std::vector<double> z = theta, theta_prev(static_cast<std::size_t>(d));
    std::vector<double> t(static_cast<std::size_t>(n)), t_theta(static_cast<std::size_t>(n));
    std::vector<double> g(static_cast<std::size_t>(d)), cand(static_cast<std::size_t>(d));
    double momentum_t = 1.0;
    double residual = std::numeric_limits<double>::infinity();

    for (long long iter = 0; iter < opt.max_iter; ++iter) {
        double loss_z = work.margins(z, t);
        work.data_grad(t, g);

        double loss_cand = 0.0;
        while (true) {
            double step = 1.0 / lips;
            double quad = 0.0, lin = 0.0;
            for (long long j = 0; j < d; ++j) {
                std::size_t js = static_cast<std::size_t>(j);
                double raw = z[js] - step * g[js];
                double thresh = step * lambda;
                double nt = l1 ? (raw > thresh ? raw - thresh
                                               : (raw < -thresh ? raw + thresh : 0.0))
                               : raw / (1.0 + step * lambda);
                cand[js] = nt;
                double diff = nt - z[js];
                lin += g[js] * diff;
                quad += diff * diff;
            }
            loss_cand = work.margins(cand, t_theta);
            double model = loss_z + lin + 0.5 * lips * quad;
            if (loss_cand <= model + 1e-10 * (1.0 + std::fabs(loss_z))) break;
            lips *= 2.0;
            if (lips > 1e18) throw ConvergenceError(residual);
        }
        theta_prev.swap(theta);
        double restart_dot = 0.0;
        for (long long j = 0; j < d; ++j) {
            std::size_t js = static_cast<std::size_t>(j);
            restart_dot += (z[js] - cand[js]) * (cand[js] - theta_prev[js]);
            theta[js] = cand[js];
        }
        if (restart_dot > 0.0) momentum_t = 1.0; // adaptive restart
        double next_t = 0.5 * (1.0 + std::sqrt(1.0 + 4.0 * momentum_t * momentum_t));
        double mom = (momentum_t - 1.0) / next_t;
        momentum_t = next_t;
        for (long long j = 0; j < d; ++j) {
            std::size_t js = static_cast<std::size_t>(j);
            z[js] = theta[js] + mom * (theta[js] - theta_prev[js]);
        }

        if ((iter & 15) == 15 || iter == opt.max_iter - 1) {
            if (l1) {
                double primal = 0.0;
                double gap = work.l1_duality_gap(theta, t_theta, &primal);
                // the gap is tested against the objective's own scale; an
                // absolute 1e-8 would demand ~1e-11 relative precision on
                // n-sample losses
                residual = gap;
                if (gap <= opt.tol * (1.0 + std::fabs(primal)))
                    return LinearClassifier{std::move(theta)};
            } else {
                // certified gap: F - F* <= |grad F|^2 / (2*lambda)
                work.data_grad(t_theta, g);
                double g2 = 0.0;
                for (long long j = 0; j < d; ++j) {
                    std::size_t js = static_cast<std::size_t>(j);
                    double gj = g[js] + lambda * theta[js];
                    g2 += gj * gj;
                }
                residual = g2 / (2.0 * lambda);
                if (residual <= opt.tol) return LinearClassifier{std::move(theta)};
            }
        }
    }
    throw ConvergenceError(residual);
}

// In-place SPD Cholesky solve of A x = b; A is overwritten by its factor.
void cholesky_solve(std::vector<double>& a, long long n, std::vector<double>& b) {
    for (long long j = 0; j < n; ++j) {
        double diag = a[static_cast<std::size_t>(j * n + j)];
        for (long long k = 0; k < j; ++k) {
            double v = a[static_cast<std::size_t>(j * n + k)];
            diag -= v * v;
        }
        if (diag <= 0.0) throw std::runtime_error("ridge system is not positive definite");
        diag = std::sqrt(diag);
        a[static_cast<std::size_t>(j * n + j)] = diag;
        for (long long i = j + 1; i < n; ++i) {
            double v = a[static_cast<std::size_t>(i * n + j)];
            for (long long k = 0; k < j; ++k)
                v -= a[static_cast<std::size_t>(i * n + k)] * a[static_cast<std::size_t>(j * n + k)];
            a[static_cast<std::size_t>(i * n + j)] = v / diag;
        }
    }
    for (long long i = 0; i < n; ++i) { // L z = b
        double v = b[static_cast<std::size_t>(i)];
        for (long long k = 0; k < i; ++k)
            v -= a[static_cast<std::size_t>(i * n + k)] * b[static_cast<std::size_t>(k)];
        b[static_cast<std::size_t>(i)] = v / a[static_cast<std::size_t>(i * n + i)];
    }
    for (long long i = n - 1; i >= 0; --i) { // L' x = z
        double v = b[static_cast<std::size_t>(i)];
        for (long long k = i + 1; k < n; ++k)
            v -= a[static_cast<std::size_t>(k * n + i)] * b[static_cast<std::size_t>(k)];
        b[static_cast<std::size_t>(i)] = v / a[static_cast<std::size_t>(i * n + i)];
    }
}

} // namespace

Dataset subsample(const Dataset& data, long long n_sub) {
    require(n_sub >= 1 && n_sub <= data.n, "subsample: n_sub outside [1, n]");
    Dataset out;
    out.n = n_sub;
    out.d = data.d;
    out.x.assign(data.x.begin(), data.x.begin() + n_sub * data.d);
    out.y.assign(data.y.begin(), data.y.begin() + n_sub);
    return out;
}

Dataset project(const Dataset& data, long long d_proj) {
    require(d_proj >= 1 && d_proj <= data.d, "project: d_proj outside [1, d]");
    Dataset out;
    out.n = data.n;
    out.d = d_proj;
    out.y = data.y;
    out.x.resize(static_cast<std::size_t>(data.n * d_proj));
    for (long long i = 0; i < data.n; ++i) {
        const double* src = data.row(i);
        double* dst = out.row(i);
        for (long long j = 0; j < d_proj; ++j) dst[j] = src[j];
    }
    return out;
}

LinearClassifier train_logistic(const Dataset& data, const LogisticOptions& opt) {
    check_train_data(data);
    require(opt.C > 0.0, "train_logistic: C must be positive");
    require(opt.tol > 0.0, "train_logistic: tol must be positive");
    LinearClassifier clf = solve_logistic(data, opt);
    bool all_zero = std::all_of(clf.theta.begin(), clf.theta.end(),
                                [](double v) { return v == 0.0; });
    if (all_zero) throw DegenerateModelError();
    return clf;
}

LinearClassifier train_ridge_primal(const Dataset& data, double reg_alpha) {
    check_train_data(data);
    require(reg_alpha > 0.0, "train_ridge: reg_alpha must be positive");
    long long n = data.n, d = data.d;
    std::vector<double> a(static_cast<std::size_t>(d * d), 0.0);
    for (long long i = 0; i < n; ++i) { // A = X'X + alpha I (lower triangle)
        const double* row = data.row(i);
        for (long long j = 0; j < d; ++j)
            for (long long k = 0; k <= j; ++k)
                a[static_cast<std::size_t>(j * d + k)] += row[j] * row[k];
    }
    for (long long j = 0; j < d; ++j) a[static_cast<std::size_t>(j * d + j)] += reg_alpha;
    std::vector<double> b(static_cast<std::size_t>(d), 0.0);
    for (long long i = 0; i < n; ++i) {
        const double* row = data.row(i);
        double yi = data.y[static_cast<std::size_t>(i)];
        for (long long j = 0; j < d; ++j) b[static_cast<std::size_t>(j)] += yi * row[j];
    }
    cholesky_solve(a, d, b);
    bool all_zero = std::all_of(b.begin(), b.end(), [](double v) { return v == 0.0; });
    if (all_zero) throw DegenerateModelError();
    return LinearClassifier{std::move(b)};
}

LinearClassifier train_ridge_dual(const Dataset& data, double reg_alpha) {
    check_train_data(data);
    require(reg_alpha > 0.0, "train_ridge: reg_alpha must be positive");
    long long n = data.n, d = data.d;
    std::vector<double> k(static_cast<std::size_t>(n * n), 0.0);
    for (long long i = 0; i < n; ++i) { // K = X X' + alpha I (lower triangle)
        for (long long j = 0; j <= i; ++j)
            k[static_cast<std::size_t>(i * n + j)] = dot(data.row(i), data.row(j), d);
        k[static_cast<std::size_t>(i * n + i)] += reg_alpha;
    }
    std::vector<double> w(static_cast<std::size_t>(n));
    for (long long i = 0; i < n; ++i) w[static_cast<std::size_t>(i)] = data.y[static_cast<std::size_t>(i)];
    cholesky_solve(k, n, w);
    std::vector<double> theta(static_cast<std::size_t>(d), 0.0);
    for (long long i = 0; i < n; ++i) {
        const double* row = data.row(i);
        double wi = w[static_cast<std::size_t>(i)];
        for (long long j = 0; j < d; ++j) theta[static_cast<std::size_t>(j)] += wi * row[j];
    }
    bool all_zero = std::all_of(theta.begin(), theta.end(), [](double v) { return v == 0.0; });
    if (all_zero) throw DegenerateModelError();
    return LinearClassifier{std::move(theta)};
}

LinearClassifier train_ridge(const Dataset& data, double reg_alpha) {
    check_train_data(data);
    return data.d > data.n ? train_ridge_dual(data, reg_alpha)
                           : train_ridge_primal(data, reg_alpha);
}

KnnModel make_knn(const Dataset& data, long long k) {
    check_train_data(data);
    require(k >= 1 && k <= data.n, "make_knn: k outside [1, n]");
    return KnnModel{k, data};
}

std::vector<long long> knn_select(const double* dists, long long n, long long k) {
    require(k >= 1 && k <= n, "knn_select: k outside [1, n]");
    // (distance, index) selection; strict lexicographic "better" keeps the
    // lower index on distance ties because candidates arrive in index order
    std::vector<long long> best;
    best.reserve(static_cast<std::size_t>(k));
    for (long long i = 0; i < n; ++i) {
        double di = dists[i];
        if (static_cast<long long>(best.size()) < k) {
            best.push_back(i);
            for (std::size_t p = best.size() - 1; p > 0; --p) {
                if (dists[best[p]] < dists[best[p - 1]]) std::swap(best[p], best[p - 1]);
                else break;
            }
        } else if (di < dists[best.back()]) {
            best.back() = i;
            for (std::size_t p = best.size() - 1; p > 0; --p) {
                if (dists[best[p]] < dists[best[p - 1]]) std::swap(best[p], best[p - 1]);
                else break;
            }
        }
    }
    return best;
}

int knn_vote(const std::vector<long long>& selected, const std::vector<int>& labels) {
    int sum = 0;
    for (long long idx : selected) sum += labels[static_cast<std::size_t>(idx)];
    if (sum > 0) return 1;
    if (sum < 0) return -1;
    return labels[static_cast<std::size_t>(selected.front())];
}

int knn_classify(const KnnModel& model, const double* x) {
    std::vector<double> dists(static_cast<std::size_t>(model.train.n));
    for (long long i = 0; i < model.train.n; ++i)
        dists[static_cast<std::size_t>(i)] = dist2(x, model.train.row(i), model.train.d);
    auto sel = knn_select(dists.data(), model.train.n, model.k);
    return knn_vote(sel, model.train.y);
}

namespace {

struct TreeBuilder {
    const Dataset& data;
    const std::vector<long long>& boot; // bootstrap sample, indices into data
    long long mtry;
    std::optional<long long> max_depth;
    Rng rng;
    std::vector<ForestNode> nodes;

    int build(std::vector<long long>& idx, long long depth) {
        long long n = static_cast<long long>(idx.size());
        long long pos = 0;
        for (long long i : idx)
            if (data.y[static_cast<std::size_t>(boot[static_cast<std::size_t>(i)])] == 1) ++pos;
        long long neg = n - pos;
        int majority = pos > neg ? 1 : -1; // exact tie goes to the negative class

        auto leaf = [&](int label) {
            nodes.push_back(ForestNode{-1, 0.0, -1, -1, label});
            return static_cast<int>(nodes.size() - 1);
        };
        if (pos == 0 || neg == 0 || n < 2 || (max_depth && depth >= *max_depth) || depth >= 64)
            return leaf(majority);

        double parent_gini = 1.0 - (double(pos) / n) * (double(pos) / n)
                                 - (double(neg) / n) * (double(neg) / n);

        // sample mtry distinct features (partial Fisher-Yates)
        std::vector<long long> feats(static_cast<std::size_t>(data.d));
        std::iota(feats.begin(), feats.end(), 0);
        for (long long j = 0; j < mtry; ++j) {
            long long pick = j + static_cast<long long>(rng.next_double() *
                                                        static_cast<double>(data.d - j));
            if (pick >= data.d) pick = data.d - 1;
            std::swap(feats[static_cast<std::size_t>(j)], feats[static_cast<std::size_t>(pick)]);
        }

        long long best_feat = -1;
        double best_thresh = 0.0, best_score = parent_gini;
        std::vector<std::pair<double, int>> vals(static_cast<std::size_t>(n));
        for (long long fj = 0; fj < mtry; ++fj) {
            long long f = feats[static_cast<std::size_t>(fj)];
            for (long long i = 0; i < n; ++i) {
                long long src = boot[static_cast<std::size_t>(idx[static_cast<std::size_t>(i)])];
                vals[static_cast<std::size_t>(i)] = {data.row(src)[f],
                                                     data.y[static_cast<std::size_t>(src)]};
            }
            std::sort(vals.begin(), vals.end());
            long long left_pos = 0;
            for (long long i = 0; i + 1 < n; ++i) {
                if (vals[static_cast<std::size_t>(i)].second == 1) ++left_pos;
                if (vals[static_cast<std::size_t>(i)].first ==
                    vals[static_cast<std::size_t>(i + 1)].first)
                    continue; // no threshold separates equal values
                long long nl = i + 1, nr = n - nl;
                double lp = double(left_pos) / nl, rp = double(pos - left_pos) / nr;
                double gini = (nl * (2.0 * lp * (1.0 - lp)) + nr * (2.0 * rp * (1.0 - rp))) / n;
                if (gini < best_score) {
                    best_score = gini;
                    best_feat = f;
                    best_thresh = 0.5 * (vals[static_cast<std::size_t>(i)].first +
                                         vals[static_cast<std::size_t>(i + 1)].first);
                }
            }
        }
        if (best_feat < 0) return leaf(majority);

        std::vector<long long> left, right;
        for (long long i : idx) {
            long long src = boot[static_cast<std::size_t>(i)];
            if (data.row(src)[best_feat] <= best_thresh) left.push_back(i);
            else right.push_back(i);
        }
        if (left.empty() || right.empty()) return leaf(majority);

        int me = static_cast<int>(nodes.size());
        nodes.push_back(ForestNode{static_cast<int>(best_feat), best_thresh, -1, -1, 0});
        int l = build(left, depth + 1);
        int r = build(right, depth + 1);
        nodes[static_cast<std::size_t>(me)].left = l;
        nodes[static_cast<std::size_t>(me)].right = r;
        return me;
    }
};

int walk_tree(const ForestTree& tree, const double* x) {
    int at = 0;
    for (;;) {
        const ForestNode& node = tree.nodes[static_cast<std::size_t>(at)];
        if (node.feature < 0) return node.label;
        at = x[node.feature] <= node.threshold ? node.left : node.right;
    }
}

} // namespace

ForestModel train_forest(const Dataset& data, long long n_trees,
                         std::optional<long long> max_depth, const Rng& stream) {
    check_train_data(data);
    require(n_trees >= 1, "train_forest: n_trees must be >= 1");
    ForestModel model;
    model.d = data.d;
    model.trees.resize(static_cast<std::size_t>(n_trees));
    long long mtry = std::max<long long>(
        1, static_cast<long long>(std::floor(std::sqrt(static_cast<double>(data.d)))));
    for (long long t = 0; t < n_trees; ++t) {
        Rng tree_rng = stream.derive(static_cast<std::uint64_t>(t));
        std::vector<long long> boot(static_cast<std::size_t>(data.n));
        for (auto& b : boot) {
            b = static_cast<long long>(tree_rng.next_double() * static_cast<double>(data.n));
            if (b >= data.n) b = data.n - 1;
        }
        TreeBuilder builder{data, boot, mtry, max_depth, tree_rng.derive("splits"), {}};
        std::vector<long long> all(static_cast<std::size_t>(data.n));
        std::iota(all.begin(), all.end(), 0);
        builder.build(all, 0);
        model.trees[static_cast<std::size_t>(t)].nodes = std::move(builder.nodes);
    }
    return model;
}

long long model_dim(const TrainedModel& model) {
    if (const auto* lin = std::get_if<LinearClassifier>(&model))
        return static_cast<long long>(lin->theta.size());
    if (const auto* knn = std::get_if<KnnModel>(&model)) return knn->train.d;
    return std::get<ForestModel>(model).d;
}

int predict(const LinearClassifier& model, const double* x) {
    double s = dot(model.theta.data(), x, static_cast<long long>(model.theta.size()));
    return s >= 0.0 ? 1 : -1;
}

int predict(const KnnModel& model, const double* x) { return knn_classify(model, x); }

int predict(const ForestModel& model, const double* x) {
    int votes = 0;
    for (const auto& tree : model.trees) votes += walk_tree(tree, x);
    if (votes > 0) return 1;
    if (votes < 0) return -1;
    return -1; // tied forest votes default to the negative class
}

int predict(const TrainedModel& model, const double* x) {
    return std::visit([x](const auto& m) { return predict(m, x); }, model);
}

MetricEstimate empirical_accuracy(const TrainedModel& model, const GaussianTask& task,
                                  long long n_test, const Rng& stream, double confidence) {
    require(n_test > 0, "empirical_accuracy: n_test must be positive");
    long long dims = model_dim(model);
    require(dims <= task.d, "empirical_accuracy: model dimension exceeds task dimension");
    std::vector<double> buf(static_cast<std::size_t>(dims));
    long long correct = 0;
    for (long long i = 0; i < n_test; ++i) {
        int label = sample_into(task, i, stream, buf.data(), dims);
        if (predict(model, buf.data()) == label) ++correct;
    }
    return empirical_metric(correct, n_test, confidence);
}

} // namespace driftlab
