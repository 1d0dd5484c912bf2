#include <algorithm>
#include <cmath>
#include <limits>
#include <list>
#include <unordered_map>

#include "detail.hpp"
#include "multidx/simd/kernels.hpp"

namespace multidx::learners {

namespace {

constexpr double kTau = 1e-12;

/// LRU cache of RBF kernel rows K(x_i, .).
class KernelRows {
public:
    KernelRows(const Matrix& x, double gamma, std::size_t cache_megabytes) : x_(x), gamma_(gamma) {
        const std::size_t row_bytes = std::max<std::size_t>(1, x.rows()) * sizeof(double);
        capacity_ = std::max<std::size_t>(2, cache_megabytes * 1024 * 1024 / row_bytes);
    }

    std::span<const double> row(std::size_t i) {
        if (auto it = rows_.find(i); it != rows_.end()) {
            order_.splice(order_.begin(), order_, it->second.second);
            return it->second.first;
        }
        if (rows_.size() >= capacity_) {
            rows_.erase(order_.back());
            order_.pop_back();
        }
        std::vector<double> values(x_.rows());
        const auto xi = x_.row(i);
        for (std::size_t t = 0; t < x_.rows(); ++t) values[t] = std::exp(-gamma_ * simd::squared_distance(xi, x_.row(t)));
        order_.push_front(i);
        auto [it, inserted] = rows_.emplace(i, std::make_pair(std::move(values), order_.begin()));
        return it->second.first;
    }

private:
    const Matrix& x_;
    double gamma_;
    std::size_t capacity_;
    std::list<std::size_t> order_;
    std::unordered_map<std::size_t, std::pair<std::vector<double>, std::list<std::size_t>::iterator>> rows_;
};

}  // namespace

SmoResult solve_smo(const Matrix& x, std::span<const int> y, double c, double gamma, double tolerance,
                    std::size_t cache_megabytes) {
    const std::size_t n = x.rows();
    require(y.size() == n, ErrorCode::InvalidArgument, "smo: label count mismatch");
    require(c > 0.0, ErrorCode::InvalidArgument, "smo: C must be positive");
    for (int label : y) require(label == 1 || label == -1, ErrorCode::InvalidArgument, "smo: labels must be +1/-1");

    KernelRows kernel(x, gamma, cache_megabytes);
    std::vector<double> alpha(n, 0.0);
    std::vector<double> grad(n, -1.0);  // gradient of 0.5 a'Qa - e'a
    auto upper = [&](std::size_t t) { return alpha[t] >= c; };
    auto lower = [&](std::size_t t) { return alpha[t] <= 0.0; };
    auto yf = [&](std::size_t t) { return static_cast<double>(y[t]); };

    const std::size_t max_iterations = std::max<std::size_t>(10'000'000, 100 * n);
    std::size_t iteration = 0;
    for (; iteration < max_iterations; ++iteration) {
        // Working set: i maximizes -y G over I_up; j minimizes the second-order
        // objective decrease over I_low.
        double g_max = -std::numeric_limits<double>::infinity();
        std::size_t i = n;
        for (std::size_t t = 0; t < n; ++t) {
            if (y[t] == 1) {
                if (!upper(t) && -grad[t] >= g_max) {
                    g_max = -grad[t];
                    i = t;
                }
            } else if (!lower(t) && grad[t] >= g_max) {
                g_max = grad[t];
                i = t;
            }
        }
        if (i == n) break;
        const auto k_i = kernel.row(i);

        double g_max2 = -std::numeric_limits<double>::infinity();
        double best_objective = std::numeric_limits<double>::infinity();
        std::size_t j = n;
        for (std::size_t t = 0; t < n; ++t) {
            const double q_it = yf(i) * yf(t) * k_i[t];
            if (y[t] == 1) {
                if (lower(t)) continue;
                const double grad_diff = g_max + grad[t];
                g_max2 = std::max(g_max2, grad[t]);
                if (grad_diff > 0.0) {
                    double quad = 2.0 - 2.0 * yf(i) * q_it;
                    if (quad <= 0.0) quad = kTau;
                    const double objective = -(grad_diff * grad_diff) / quad;
                    if (objective <= best_objective) {
                        best_objective = objective;
                        j = t;
                    }
                }
            } else {
                if (upper(t)) continue;
                const double grad_diff = g_max - grad[t];
                g_max2 = std::max(g_max2, -grad[t]);
                if (grad_diff > 0.0) {
                    double quad = 2.0 + 2.0 * yf(i) * q_it;
                    if (quad <= 0.0) quad = kTau;
                    const double objective = -(grad_diff * grad_diff) / quad;
                    if (objective <= best_objective) {
                        best_objective = objective;
                        j = t;
                    }
                }
            }
        }
        if (g_max + g_max2 < tolerance || j == n) break;

        const auto k_i_row = kernel.row(i);
        const auto k_j = kernel.row(j);
        const double old_ai = alpha[i];
        const double old_aj = alpha[j];
        const double q_ij = yf(i) * yf(j) * k_i_row[j];
        if (y[i] != y[j]) {
            double quad = 2.0 + 2.0 * q_ij;
            if (quad <= 0.0) quad = kTau;
            const double delta = (-grad[i] - grad[j]) / quad;
            const double diff = alpha[i] - alpha[j];
            alpha[i] += delta;
            alpha[j] += delta;
            if (diff > 0.0) {
                if (alpha[j] < 0.0) {
                    alpha[j] = 0.0;
                    alpha[i] = diff;
                }
            } else if (alpha[i] < 0.0) {
                alpha[i] = 0.0;
                alpha[j] = -diff;
            }
            if (diff > 0.0) {
                if (alpha[i] > c) {
                    alpha[i] = c;
                    alpha[j] = c - diff;
                }
            } else if (alpha[j] > c) {
                alpha[j] = c;
                alpha[i] = c + diff;
            }
        } else {
            double quad = 2.0 - 2.0 * q_ij;
            if (quad <= 0.0) quad = kTau;
            const double delta = (grad[i] - grad[j]) / quad;
            const double sum = alpha[i] + alpha[j];
            alpha[i] -= delta;
            alpha[j] += delta;
            if (sum > c) {
                if (alpha[i] > c) {
                    alpha[i] = c;
                    alpha[j] = sum - c;
                }
            } else if (alpha[j] < 0.0) {
                alpha[j] = 0.0;
                alpha[i] = sum;
            }
            if (sum > c) {
                if (alpha[j] > c) {
                    alpha[j] = c;
                    alpha[i] = sum - c;
                }
            } else if (alpha[i] < 0.0) {
                alpha[i] = 0.0;
                alpha[j] = sum;
            }
        }
        const double delta_i = alpha[i] - old_ai;
        const double delta_j = alpha[j] - old_aj;
        for (std::size_t t = 0; t < n; ++t)
            grad[t] += yf(t) * (yf(i) * k_i_row[t] * delta_i + yf(j) * k_j[t] * delta_j);
    }

    // Bias from free vectors, or the midpoint of the feasible interval.
    double upper_bound = std::numeric_limits<double>::infinity();
    double lower_bound = -std::numeric_limits<double>::infinity();
    double free_sum = 0.0;
    std::size_t free_count = 0;
    for (std::size_t t = 0; t < n; ++t) {
        const double yg = yf(t) * grad[t];
        if (upper(t)) {
            if (y[t] == -1) upper_bound = std::min(upper_bound, yg);
            else lower_bound = std::max(lower_bound, yg);
        } else if (lower(t)) {
            if (y[t] == 1) upper_bound = std::min(upper_bound, yg);
            else lower_bound = std::max(lower_bound, yg);
        } else {
            ++free_count;
            free_sum += yg;
        }
    }
    double rho = 0.0;
    if (free_count > 0) rho = free_sum / static_cast<double>(free_count);
    else if (std::isfinite(upper_bound) && std::isfinite(lower_bound)) rho = (upper_bound + lower_bound) / 2.0;
    else if (std::isfinite(upper_bound)) rho = upper_bound;
    else if (std::isfinite(lower_bound)) rho = lower_bound;

    return SmoResult{std::move(alpha), -rho, iteration};
}

PlattParameters fit_platt(std::span<const double> decision_values, std::span<const int> y) {
    const std::size_t n = decision_values.size();
    double prior1 = 0.0, prior0 = 0.0;
    for (int label : y) (label > 0 ? prior1 : prior0) += 1.0;

    const double hi_target = (prior1 + 1.0) / (prior1 + 2.0);
    const double lo_target = 1.0 / (prior0 + 2.0);
    std::vector<double> target(n);
    for (std::size_t i = 0; i < n; ++i) target[i] = y[i] > 0 ? hi_target : lo_target;

    auto objective = [&](double a, double b) {
        double value = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            const double f = decision_values[i] * a + b;
            value += f >= 0.0 ? target[i] * f + std::log1p(std::exp(-f)) : (target[i] - 1.0) * f + std::log1p(std::exp(f));
        }
        return value;
    };

    double a = 0.0;
    double b = std::log((prior0 + 1.0) / (prior1 + 1.0));
    double fval = objective(a, b);
    constexpr double min_step = 1e-10;
    constexpr double sigma = 1e-12;
    for (int iteration = 0; iteration < 100; ++iteration) {
        double h11 = sigma, h22 = sigma, h21 = 0.0, g1 = 0.0, g2 = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            const double f = decision_values[i] * a + b;
            double p, q;
            if (f >= 0.0) {
                p = std::exp(-f) / (1.0 + std::exp(-f));
                q = 1.0 / (1.0 + std::exp(-f));
            } else {
                p = 1.0 / (1.0 + std::exp(f));
                q = std::exp(f) / (1.0 + std::exp(f));
            }
            const double d2 = p * q;
            h11 += decision_values[i] * decision_values[i] * d2;
            h22 += d2;
            h21 += decision_values[i] * d2;
            const double d1 = target[i] - p;
            g1 += decision_values[i] * d1;
            g2 += d1;
        }
        if (std::abs(g1) < 1e-5 && std::abs(g2) < 1e-5) break;

        const double det = h11 * h22 - h21 * h21;
        const double da = -(h22 * g1 - h21 * g2) / det;
        const double db = -(-h21 * g1 + h11 * g2) / det;
        const double gd = g1 * da + g2 * db;
        double step = 1.0;
        while (step >= min_step) {
            const double new_a = a + step * da;
            const double new_b = b + step * db;
            const double new_f = objective(new_a, new_b);
            if (new_f < fval + 0.0001 * step * gd) {
                a = new_a;
                b = new_b;
                fval = new_f;
                break;
            }
            step /= 2.0;
        }
        if (step < min_step) break;
    }
    return PlattParameters{a, b};
}

namespace detail {

double svm_decision(const SvmMachine& machine, double gamma, std::span<const double> row) {
    double value = machine.bias;
    for (std::size_t s = 0; s < machine.support_vectors.rows(); ++s)
        value += machine.coefficients[s] * std::exp(-gamma * simd::squared_distance(row, machine.support_vectors.row(s)));
    return value;
}

namespace {

double platt_probability(const SvmMachine& machine, double decision) {
    const double f = machine.platt_a * decision + machine.platt_b;
    return f >= 0.0 ? std::exp(-f) / (1.0 + std::exp(-f)) : 1.0 / (1.0 + std::exp(f));
}

}  // namespace

SvmModel fit_svm(const Matrix& x, std::span<const int> y, std::size_t classes, const SvmParams& params) {
    SvmModel model;
    if (params.gamma) {
        model.gamma = *params.gamma;
    } else {
        const auto& values = x.data();
        double mean = 0.0;
        for (double v : values) mean += v;
        mean /= static_cast<double>(values.size());
        double variance = 0.0;
        for (double v : values) variance += (v - mean) * (v - mean);
        variance /= static_cast<double>(values.size());
        model.gamma = variance > 0.0 ? 1.0 / (static_cast<double>(x.cols()) * variance) : 1.0;
    }

    const std::size_t outputs = classes == 2 ? 1 : classes;
    std::vector<int> signs(x.rows());
    for (std::size_t k = 0; k < outputs; ++k) {
        const int positive = outputs == 1 ? 1 : static_cast<int>(k);
        for (std::size_t r = 0; r < x.rows(); ++r) signs[r] = y[r] == positive ? 1 : -1;

        SvmMachine machine;
        const bool one_sided = std::all_of(signs.begin(), signs.end(), [&](int s) { return s == signs.front(); });
        if (one_sided) {
            // Class absent from this one-vs-rest problem: constant decision.
            machine.support_vectors = Matrix(0, x.cols());
            machine.bias = static_cast<double>(signs.front());
        } else {
            const SmoResult solved = solve_smo(x, signs, params.c, model.gamma, params.tolerance, params.cache_megabytes);
            machine.support_vectors = Matrix(0, x.cols());
            for (std::size_t r = 0; r < x.rows(); ++r) {
                if (solved.alpha[r] <= 0.0) continue;
                machine.support_vectors.append_row(x.row(r));
                machine.coefficients.push_back(solved.alpha[r] * signs[r]);
            }
            machine.bias = solved.bias;
        }
        std::vector<double> decisions(x.rows());
        for (std::size_t r = 0; r < x.rows(); ++r) decisions[r] = svm_decision(machine, model.gamma, x.row(r));
        const PlattParameters platt = fit_platt(decisions, signs);
        machine.platt_a = platt.a;
        machine.platt_b = platt.b;
        model.machines.push_back(std::move(machine));
    }
    return model;
}

Matrix svm_proba(const SvmModel& model, std::size_t classes, const Matrix& rows) {
    Matrix out(rows.rows(), classes);
    for (std::size_t r = 0; r < rows.rows(); ++r) {
        if (model.machines.size() == 1) {
            const double p = platt_probability(model.machines[0], svm_decision(model.machines[0], model.gamma, rows.row(r)));
            out(r, 0) = 1.0 - p;
            out(r, 1) = p;
            continue;
        }
        double total = 0.0;
        for (std::size_t k = 0; k < classes; ++k) {
            out(r, k) = platt_probability(model.machines[k], svm_decision(model.machines[k], model.gamma, rows.row(r)));
            total += out(r, k);
        }
        for (std::size_t k = 0; k < classes; ++k) out(r, k) = total > 0.0 ? out(r, k) / total : 1.0 / static_cast<double>(classes);
    }
    return out;
}

}  // namespace detail
}  // namespace multidx::learners
