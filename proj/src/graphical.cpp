#include "cpsim/graphical.hpp"

#include <algorithm>
#include <deque>
#include <map>
#include <stdexcept>
#include <tuple>

#include "cpsim/rng.hpp"

namespace cpsim {

void GraphicalRealization::finalize() {
    events.clear();
    for (int i = 0; i < n; ++i)
        for (double s : recovery_marks[static_cast<std::size_t>(i)])
            events.push_back({s, 0, i, -1});
    for (const Arrow& a : arrows) events.push_back({a.t, 1, a.from, a.to});
    std::sort(events.begin(), events.end(), [](const Event& x, const Event& y) {
        return std::tie(x.t, x.kind, x.a, x.b) < std::tie(y.t, y.kind, y.a, y.b);
    });

    arrows.clear();
    mark_positions.assign(static_cast<std::size_t>(n), {});
    arrow_positions.assign(static_cast<std::size_t>(n), {});
    for (int p = 0; p < static_cast<int>(events.size()); ++p) {
        const Event& ev = events[static_cast<std::size_t>(p)];
        if (ev.kind == 0) {
            mark_positions[static_cast<std::size_t>(ev.a)].push_back(p);
        } else {
            arrow_positions[static_cast<std::size_t>(ev.a)].push_back(p);
            arrows.push_back({ev.t, ev.a, ev.b});
        }
    }
}

GraphicalRealization sample_realization(const Environment& env, double lambda, double T,
                                        std::uint64_t seed) {
    if (T < 0) throw std::invalid_argument("sample_realization: negative horizon");
    const int n = env.n();
    GraphicalRealization real;
    real.n = n;
    real.horizon = T;
    real.recovery_marks.resize(static_cast<std::size_t>(n));

    RandomStream rng(derive_seed(seed, StreamDomain::graphical, 0));
    for (int i = 0; i < n; ++i) {
        auto& marks = real.recovery_marks[static_cast<std::size_t>(i)];
        for (double t = rng.exponential(env.xi(i)); t <= T; t += rng.exponential(env.xi(i)))
            marks.push_back(t);
    }
    for (int i = 0; i < n; ++i) {
        for (int j = 0; j < n; ++j) {
            if (j == i) continue;
            const double rate = lambda / n * env.rho(i, j);
            if (rate <= 0) continue;
            for (double t = rng.exponential(rate); t <= T; t += rng.exponential(rate))
                real.arrows.push_back({t, i, j});
        }
    }
    real.finalize();
    return real;
}

std::vector<int> evolve(const GraphicalRealization& real, std::span<const int> initial,
                        double t) {
    if (t > real.horizon) throw std::invalid_argument("evolve: t beyond horizon");
    std::vector<std::uint8_t> live(static_cast<std::size_t>(real.n), 0);
    for (int v : initial) {
        if (v < 0 || v >= real.n) throw std::out_of_range("evolve: initial vertex");
        live[static_cast<std::size_t>(v)] = 1;
    }
    for (const auto& ev : real.events) {
        if (ev.t > t) break;
        if (ev.kind == 0)
            live[static_cast<std::size_t>(ev.a)] = 0;
        else if (live[static_cast<std::size_t>(ev.a)])
            live[static_cast<std::size_t>(ev.b)] = 1;
    }
    std::vector<int> out;
    for (int v = 0; v < real.n; ++v)
        if (live[static_cast<std::size_t>(v)]) out.push_back(v);
    return out;
}

namespace {

// Liveness of a vertex splits into segments between consecutive recovery marks
// (in merged event order). A birth at position p keeps the vertex live up to the
// first mark strictly after p; for a fixed segment, an earlier birth can only
// fire more arrows, so the search keeps the minimal birth per (vertex, segment).
int segment_end(const std::vector<int>& marks, int birth_pos, int sentinel) {
    auto it = std::upper_bound(marks.begin(), marks.end(), birth_pos);
    return it == marks.end() ? sentinel : *it;
}

}  // namespace

bool infection_path_exists(const GraphicalRealization& real, int i, int j, double t) {
    if (t > real.horizon) throw std::invalid_argument("infection_path_exists: t beyond horizon");
    if (i < 0 || i >= real.n || j < 0 || j >= real.n)
        throw std::out_of_range("infection_path_exists: vertex index");

    // Last merged-event position with time <= t; positions beyond it do not exist
    // for this query.
    int last = -1;
    {
        int lo = 0, hi = static_cast<int>(real.events.size());
        while (lo < hi) {
            const int mid = (lo + hi) / 2;
            if (real.events[static_cast<std::size_t>(mid)].t <= t)
                lo = mid + 1;
            else
                hi = mid;
        }
        last = lo - 1;
    }
    const int sentinel = static_cast<int>(real.events.size());

    std::map<std::pair<int, int>, int> best;  // (vertex, segment end) -> min birth pos
    std::deque<std::tuple<int, int, int>> queue;  // vertex, birth pos, segment end

    auto push = [&](int v, int birth) {
        const int end = segment_end(real.mark_positions[static_cast<std::size_t>(v)], birth,
                                    sentinel);
        auto [it, inserted] = best.try_emplace({v, end}, birth);
        if (!inserted && it->second <= birth) return;
        it->second = birth;
        queue.emplace_back(v, birth, end);
    };

    push(i, -1);
    while (!queue.empty()) {
        auto [v, birth, end] = queue.front();
        queue.pop_front();
        if (best[{v, end}] != birth) continue;  // superseded by an earlier birth
        if (v == j && end > last) return true;  // no mark in (birth, last]
        const auto& out = real.arrow_positions[static_cast<std::size_t>(v)];
        auto it = std::upper_bound(out.begin(), out.end(), birth);
        for (; it != out.end() && *it < end && *it <= last; ++it) {
            const auto& ev = real.events[static_cast<std::size_t>(*it)];
            push(ev.b, *it);
        }
    }
    return false;
}

bool check_additivity(const GraphicalRealization& real, std::span<const int> initial, double t) {
    const std::vector<int> joint = evolve(real, initial, t);
    std::vector<std::uint8_t> member(static_cast<std::size_t>(real.n), 0);
    for (int v : initial) {
        const int single[] = {v};
        for (int w : evolve(real, single, t)) member[static_cast<std::size_t>(w)] = 1;
    }
    std::vector<int> merged;
    for (int v = 0; v < real.n; ++v)
        if (member[static_cast<std::size_t>(v)]) merged.push_back(v);
    return merged == joint;
}

GraphicalRealization truncate(const GraphicalRealization& real, double new_horizon) {
    if (new_horizon > real.horizon)
        throw std::invalid_argument("truncate: horizon can only shrink");
    GraphicalRealization out;
    out.n = real.n;
    out.horizon = new_horizon;
    out.recovery_marks.resize(static_cast<std::size_t>(real.n));
    for (int v = 0; v < real.n; ++v)
        for (double s : real.recovery_marks[static_cast<std::size_t>(v)])
            if (s <= new_horizon) out.recovery_marks[static_cast<std::size_t>(v)].push_back(s);
    for (const Arrow& a : real.arrows)
        if (a.t <= new_horizon) out.arrows.push_back(a);
    out.finalize();
    return out;
}

}  // namespace cpsim
