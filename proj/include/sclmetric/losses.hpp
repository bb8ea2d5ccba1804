#pragma once

#include <span>
#include <vector>

#include "sclmetric/dataset.hpp"
#include "sclmetric/mining.hpp"

namespace sclmetric {

/// Margins of the inter-class hinge terms, in squared-distance units.
struct SclConfig {
    double alpha1 = 2.0;  // N of subject i vs I of subject j
    double alpha2 = 3.1;  // I of subject j vs I of subject i

    void validate() const;  // throws ConfigError unless both > 0
};

/// Loss value plus its gradient with respect to each input slot. Slot meaning
/// depends on the loss: (a, b, c) for subclass losses, (x1, x2) for contrastive,
/// (anchor, positive, negative) for triplet. Unused slots are empty.
struct LossValue {
    double value = 0.0;
    Embedding grad_a;
    Embedding grad_b;
    Embedding grad_c;
};

double squared_euclidean(Vec u, Vec v);
double euclidean(Vec u, Vec v);

/// ‖a−b‖² + ‖b−c‖². An empty `c` (degenerate set) drops the second term.
LossValue scl_intra_loss(Vec a, Vec b, Vec c = {});

/// max(0, α1 − ‖a−b‖²) + max(0, α2 − ‖b−c‖²). An empty `c` drops the second term.
/// A hinge is active only while its squared distance is strictly below the
/// margin; inactive hinges contribute exactly zero gradient.
LossValue scl_inter_loss(Vec a, Vec b, Vec c, const SclConfig& cfg);

/// (1−Y)·intra + Y·inter.
LossValue scl_set_loss(SetLabel label, Vec a, Vec b, Vec c, const SclConfig& cfg);

/// Same, reading the inputs' embeddings straight from the set's samples.
LossValue scl_set_loss(const SampleSet& set, const SclConfig& cfg);

enum class Reduction { Sum, Mean };

/// Σ over sets in index order, or the mean when requested.
double scl_batch_loss(std::span<const SampleSet> sets, const SclConfig& cfg,
                      Reduction reduction = Reduction::Sum);

/// Hadsell-style contrastive loss on the Euclidean distance D:
/// genuine ½D², imposter ½max(0, m−D)². At D = 0 the imposter gradient is
/// undefined and is reported as zero.
LossValue contrastive_loss(Vec x1, Vec x2, int label, double margin);

/// max(0, ‖a−p‖² − ‖a−n‖² + m).
LossValue triplet_loss(Vec anchor, Vec positive, Vec negative, double margin);

}  // namespace sclmetric
