// Exact transport between two small grid measures as a min-cost flow on the
// complete bipartite graph sources -> sinks, solved by successive shortest
// augmenting paths with Johnson potentials (dense Dijkstra).

#include "wbmorph/error.hpp"
#include "wbmorph/transport.hpp"

#include <limits>
#include <vector>

namespace wbmorph {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

class TransportFlow {
public:
    TransportFlow(std::vector<double> supply, std::vector<double> demand, Matrix cost)
        : supply_(std::move(supply)), demand_(std::move(demand)), cost_(std::move(cost)),
          flow_(Matrix::Zero(cost_.rows(), cost_.cols())),
          pot_src_(supply_.size(), 0.0), pot_dst_(demand_.size(), 0.0)
    {
    }

    double solve()
    {
        const std::size_t max_rounds = 16 * (supply_.size() + demand_.size()) *
                                       (supply_.size() + demand_.size()) + 64;
        for (std::size_t round = 0; round < max_rounds; ++round) {
            if (!augment()) {
                break;
            }
        }
        return flow_.cwiseProduct(cost_).sum();
    }

private:
    // Nodes 0..S-1 are sources, S..S+T-1 sinks.
    bool augment()
    {
        const std::size_t ns = supply_.size();
        const std::size_t nt = demand_.size();
        const std::size_t nodes = ns + nt;
        std::vector<double> dist(nodes, kInf);
        std::vector<long> prev(nodes, -1);
        std::vector<char> done(nodes, 0);
        for (std::size_t i = 0; i < ns; ++i) {
            if (supply_[i] > 0.0) {
                dist[i] = 0.0;
            }
        }

        long target = -1;
        for (;;) {
            long best = -1;
            for (std::size_t v = 0; v < nodes; ++v) {
                if (!done[v] && dist[v] < kInf && (best < 0 || dist[v] < dist[static_cast<std::size_t>(best)])) {
                    best = static_cast<long>(v);
                }
            }
            if (best < 0) {
                break;
            }
            const auto b = static_cast<std::size_t>(best);
            done[b] = 1;
            if (b >= ns) {
                const std::size_t j = b - ns;
                if (demand_[j] > 0.0) {
                    target = best;
                    break;
                }
                // Residual reverse edges sink j -> source i.
                for (std::size_t i = 0; i < ns; ++i) {
                    if (done[i] || !(flow_(idx(i), idx(j)) > 0.0)) {
                        continue;
                    }
                    const double rc = std::max(0.0, -cost_(idx(i), idx(j)) + pot_dst_[j] - pot_src_[i]);
                    if (dist[b] + rc < dist[i]) {
                        dist[i] = dist[b] + rc;
                        prev[i] = best;
                    }
                }
            } else {
                for (std::size_t j = 0; j < nt; ++j) {
                    const std::size_t v = ns + j;
                    if (done[v]) {
                        continue;
                    }
                    const double rc = std::max(0.0, cost_(idx(b), idx(j)) + pot_src_[b] - pot_dst_[j]);
                    if (dist[b] + rc < dist[v]) {
                        dist[v] = dist[b] + rc;
                        prev[v] = best;
                    }
                }
            }
        }
        if (target < 0) {
            return false;
        }

        // Bottleneck along the path.
        const auto t = static_cast<std::size_t>(target);
        double delta = demand_[t - ns];
        std::size_t v = t;
        while (prev[v] >= 0) {
            const auto u = static_cast<std::size_t>(prev[v]);
            if (u >= ns) {  // reverse edge sink -> source
                delta = std::min(delta, flow_(idx(v), idx(u - ns)));
            }
            v = u;
        }
        delta = std::min(delta, supply_[v]);
        const std::size_t start = v;

        v = t;
        while (prev[v] >= 0) {
            const auto u = static_cast<std::size_t>(prev[v]);
            if (u < ns) {
                flow_(idx(u), idx(v - ns)) += delta;
            } else {
                double& f = flow_(idx(v), idx(u - ns));
                f = f - delta > 0.0 ? f - delta : 0.0;
            }
            v = u;
        }
        supply_[start] -= delta;
        demand_[t - ns] -= delta;
        if (supply_[start] < 0.0) {
            supply_[start] = 0.0;
        }
        if (demand_[t - ns] < 0.0) {
            demand_[t - ns] = 0.0;
        }

        const double cap = dist[t];
        for (std::size_t i = 0; i < ns; ++i) {
            pot_src_[i] += std::min(dist[i], cap);
        }
        for (std::size_t j = 0; j < nt; ++j) {
            pot_dst_[j] += std::min(dist[ns + j], cap);
        }
        return true;
    }

    static Eigen::Index idx(std::size_t i) { return static_cast<Eigen::Index>(i); }

    std::vector<double> supply_;
    std::vector<double> demand_;
    Matrix cost_;
    Matrix flow_;
    std::vector<double> pot_src_;
    std::vector<double> pot_dst_;
};

}  // namespace

double exact_lp_transport(const GridMeasure& p, const GridMeasure& q, const GroundCost& cost)
{
    require_same_shape(p.shape(), cost.shape(), "first marginal does not match the cost grid");
    require_same_shape(q.shape(), cost.shape(), "second marginal does not match the cost grid");
    const std::size_t n = cost.shape().size();
    if (n > kExactTransportMaxSize) {
        throw Error(ErrorCode::InstanceTooLarge,
                    "exact transport is limited to " + std::to_string(kExactTransportMaxSize) + " pixels");
    }

    std::vector<std::size_t> src;
    std::vector<std::size_t> dst;
    for (std::size_t i = 0; i < n; ++i) {
        if (p[i] > 0.0) {
            src.push_back(i);
        }
        if (q[i] > 0.0) {
            dst.push_back(i);
        }
    }
    const double sp = p.mass().sum();
    const double sq = q.mass().sum();
    std::vector<double> supply;
    std::vector<double> demand;
    for (auto i : src) {
        supply.push_back(p[i] / sp);
    }
    for (auto j : dst) {
        demand.push_back(q[j] / sq);
    }
    Matrix c(static_cast<Eigen::Index>(src.size()), static_cast<Eigen::Index>(dst.size()));
    for (std::size_t a = 0; a < src.size(); ++a) {
        for (std::size_t b = 0; b < dst.size(); ++b) {
            c(static_cast<Eigen::Index>(a), static_cast<Eigen::Index>(b)) = cost_between(cost, src[a], dst[b]);
        }
    }
    return TransportFlow(std::move(supply), std::move(demand), std::move(c)).solve();
}

}  // namespace wbmorph
