#pragma once

#include <iosfwd>
#include <span>

#include "polis/common.hpp"

namespace polis {

struct HistoryRecord {
    long t = 0;
    Vec theta;
    double reward = 0.0;
    Vec exogenous;
};

// Immutable window over the newest records; records.back().t == T. Snapshots
// are what the estimators consume, so nothing newer than T can leak in.
struct HistoryView {
    std::span<const HistoryRecord> records;
    long T = 0;
    size_t size() const { return records.size(); }
    const HistoryRecord& operator[](size_t i) const { return records[i]; }
};

// Rolling log of (t, theta_t, r_t, x^u_t). Times must increase by exactly one;
// the oldest records are evicted past the capacity. Single writer; snapshots
// are read-only and invalidated by the next push.
class History {
public:
    explicit History(size_t capacity);

    void push(HistoryRecord rec);
    size_t size() const { return records_.size(); }
    size_t capacity() const { return capacity_; }
    long last_time() const;

    HistoryView snapshot(size_t window) const;

    void export_csv(std::ostream& out) const;
    static History import_csv(std::istream& in, size_t capacity);

private:
    size_t capacity_;
    std::vector<HistoryRecord> records_;
};

}  // namespace polis
