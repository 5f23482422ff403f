#include "bpl/objectives.hpp"

#include <cmath>
#include <stdexcept>

namespace bpl {

namespace {

double softplus(double x) {
    // log(1 + e^x) without overflow on either tail.
    return x > 0.0 ? x + std::log1p(std::exp(-x)) : std::log1p(std::exp(x));
}

double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }

}  // namespace

double loss_t1(PreferenceModel& model, const std::vector<RatingRecord>& batch, double weight) {
    if (batch.empty()) throw std::runtime_error("empty supervised batch");
    const int K = model.num_levels();
    const double inv_n = 1.0 / static_cast<double>(batch.size());
    double loss = 0.0;
    std::vector<double> dlogits(K);
    for (const RatingRecord& rec : batch) {
        const Pair pair{rec.user, rec.item};
        const std::vector<double> p = model.predict_distribution(pair);
        loss -= std::log(p[rec.rating - 1]);
        for (int k = 0; k < K; ++k) {
            dlogits[k] = p[k] - (k == rec.rating - 1 ? 1.0 : 0.0);
        }
        model.accumulate_logit_gradient(pair, dlogits, weight * inv_n);
    }
    return loss * inv_n;
}

double loss_t2(PreferenceModel& model, BinaryMlp& discriminator,
               const std::vector<Pair>& expanded_batch, const std::vector<Pair>& rest_batch,
               double weight) {
    if (expanded_batch.empty() || rest_batch.empty()) {
        throw std::runtime_error("empty adversarial batch side");
    }
    double value = 0.0;
    // The alignment value V is a log-likelihood the discriminator ascends and
    // the encoder descends. Both Adam loops subtract gradients, so the
    // discriminator accumulates -weight * dV and the encoder +weight * dV;
    // passing -weight to backward() and flipping the returned input gradient
    // gives exactly that routing without a second pass.
    auto route = [&](const std::vector<Pair>& side, bool expanded) {
        const double inv_n = 1.0 / static_cast<double>(side.size());
        double side_value = 0.0;
        for (const Pair& pair : side) {
            const std::vector<double> z = model.encode(pair);
            const double g = discriminator.logit(z);
            const double s = sigmoid(g);
            // log fd = -softplus(-g); log(1 - fd) = -softplus(g).
            side_value -= expanded ? softplus(-g) : softplus(g);
            const double dv_dg = expanded ? 1.0 - s : -s;
            std::vector<double> dz =
                discriminator.backward(z, dv_dg * inv_n, -weight);
            model.accumulate_encoder_gradient(pair, dz, -1.0);
        }
        return side_value * inv_n;
    };
    value += route(expanded_batch, true);
    value += route(rest_batch, false);
    return value;
}

namespace {

// d(entropy)/d(logit_j) = -p_j (ln p_j + H).
void entropy_dlogits(const std::vector<double>& p, double h, std::vector<double>& out) {
    for (std::size_t k = 0; k < p.size(); ++k) out[k] = -p[k] * (std::log(p[k]) + h);
}

bool passes_filter(const std::vector<double>& p, const PreferenceModel& shadow, Pair pair,
                   FilterMode filter, double m_threshold) {
    if (filter == FilterMode::max_probability) return max_prob_filter(p, m_threshold);
    return is_reliable(shadow.predict_distribution(pair), p);
}

}  // namespace

SelfDistillResult loss_sd(PreferenceModel& model, const PreferenceModel& ensemble_shadow,
                          const std::vector<Pair>& batch, FilterMode filter, double m_threshold,
                          double weight) {
    SelfDistillResult result;
    result.batch_size = batch.size();
    if (batch.empty()) return result;
    const int K = model.num_levels();
    const double inv_n = 1.0 / static_cast<double>(batch.size());
    std::vector<double> dlogits(K);
    for (const Pair& pair : batch) {
        const std::vector<double> p = model.predict_distribution(pair);
        if (!passes_filter(p, ensemble_shadow, pair, filter, m_threshold)) continue;
        ++result.reliable;
        const double h = entropy(p);
        result.loss += h;
        entropy_dlogits(p, h, dlogits);
        model.accumulate_logit_gradient(pair, dlogits, weight * inv_n);
    }
    result.loss *= inv_n;
    return result;
}

double loss_pd(PreferenceModel& model, const TeacherPredictions& teacher,
               const std::vector<Pair>& batch, double lambda, bool with_penalty, double weight) {
    if (batch.empty()) return 0.0;
    const int K = model.num_levels();
    const double inv_n = 1.0 / static_cast<double>(batch.size());
    double loss = 0.0;
    std::vector<double> dlogits(K);
    for (const Pair& pair : batch) {
        const std::vector<double> p = model.predict_distribution(pair);
        const double e = expected_rating(p);
        const double h = entropy(p);
        const double t = teacher.at(pair);
        loss += lambda * (e - t) * (e - t) - (with_penalty ? h : 0.0);
        // d(e)/d(logit_j) = p_j (level_j - e); the -H term flips the entropy
        // gradient's sign.
        for (int k = 0; k < K; ++k) {
            const double de = p[k] * (static_cast<double>(k + 1) - e);
            dlogits[k] = 2.0 * lambda * (e - t) * de +
                         (with_penalty ? p[k] * (std::log(p[k]) + h) : 0.0);
        }
        model.accumulate_logit_gradient(pair, dlogits, weight * inv_n);
    }
    return loss * inv_n;
}

DualDistillResult loss_t3(PreferenceModel& model, const PreferenceModel& ensemble_shadow,
                          const TeacherPredictions& teacher, const AffinityScores* affinity,
                          const SpaceSplit& split, const std::vector<Pair>& batch,
                          const DistillOptions& options, double weight) {
    DualDistillResult result;
    result.batch_size = batch.size();
    if (batch.empty()) return result;
    if (options.combination == CombinationMode::soft && affinity == nullptr) {
        throw std::runtime_error("soft combination requires affinity scores");
    }
    const int K = model.num_levels();
    const double inv_n = 1.0 / static_cast<double>(batch.size());
    std::vector<double> dlogits(K);
    for (const Pair& pair : batch) {
        const double a = options.combination == CombinationMode::soft
                             ? affinity->at(pair)
                             : (split.in_s01(pair) ? 1.0 : 0.0);
        const std::vector<double> p = model.predict_distribution(pair);
        const double e = expected_rating(p);
        const double h = entropy(p);

        bool gate = false;
        if (options.include_sd) {
            gate = passes_filter(p, ensemble_shadow, pair, options.filter, options.m_threshold);
            if (gate) ++result.reliable;
        }

        const double pd_coef = options.include_pd ? a : 0.0;
        const double sd_coef = options.include_sd && gate ? 1.0 - a : 0.0;
        if (pd_coef == 0.0 && sd_coef == 0.0) continue;

        double t = 0.0;
        if (pd_coef != 0.0) {
            t = teacher.at(pair);
            result.loss +=
                pd_coef * (options.lambda * (e - t) * (e - t) -
                           (options.confidence_penalty ? h : 0.0));
        }
        if (sd_coef != 0.0) result.loss += sd_coef * h;

        for (int k = 0; k < K; ++k) {
            const double log_p = std::log(p[k]);
            double d = 0.0;
            if (pd_coef != 0.0) {
                const double de = p[k] * (static_cast<double>(k + 1) - e);
                d += pd_coef * (2.0 * options.lambda * (e - t) * de +
                                (options.confidence_penalty ? p[k] * (log_p + h) : 0.0));
            }
            if (sd_coef != 0.0) d += sd_coef * (-p[k] * (log_p + h));
            dlogits[k] = d;
        }
        model.accumulate_logit_gradient(pair, dlogits, weight * inv_n);
    }
    result.loss *= inv_n;
    return result;
}

StepLosses loss_total(PreferenceModel& model, BinaryMlp* discriminator,
                      const PreferenceModel* ensemble_shadow, const TeacherPredictions* teacher,
                      const AffinityScores* affinity, const SpaceSplit& split,
                      const StepBatches& batches, double alpha, double beta,
                      const DistillOptions& options) {
    StepLosses losses;
    if (batches.rated == nullptr) throw std::runtime_error("missing supervised batch");
    losses.t1 = loss_t1(model, *batches.rated, 1.0);
    if (alpha > 0.0 && discriminator != nullptr && batches.expanded != nullptr &&
        batches.rest != nullptr) {
        losses.t2 = loss_t2(model, *discriminator, *batches.expanded, *batches.rest, alpha);
    }
    if (beta > 0.0 && batches.unrated != nullptr && ensemble_shadow != nullptr &&
        teacher != nullptr) {
        DualDistillResult r = loss_t3(model, *ensemble_shadow, *teacher, affinity, split,
                                      *batches.unrated, options, beta);
        losses.t3 = r.loss;
        losses.sd_reliable = r.reliable;
        losses.sd_batch = r.batch_size;
    }
    losses.total = combine_losses(losses.t1, losses.t2, losses.t3, alpha, beta);
    return losses;
}

}  // namespace bpl
