#include "polis/history.hpp"

#include <istream>
#include <ostream>
#include <sstream>

namespace polis {

History::History(size_t capacity) : capacity_(capacity) {
    if (capacity_ < 1) throw ConfigError("history capacity must be >= 1");
}

void History::push(HistoryRecord rec) {
    if (!records_.empty() && rec.t != records_.back().t + 1)
        throw std::invalid_argument("history times must increase by exactly one (got " +
                                    std::to_string(rec.t) + " after " +
                                    std::to_string(records_.back().t) + ")");
    if (!records_.empty()) {
        if (rec.theta.size() != records_.back().theta.size() ||
            rec.exogenous.size() != records_.back().exogenous.size())
            throw std::invalid_argument("history record dimensions changed mid-stream");
    }
    records_.push_back(std::move(rec));
    if (records_.size() > capacity_) records_.erase(records_.begin());
}

long History::last_time() const {
    if (records_.empty()) throw std::out_of_range("history is empty");
    return records_.back().t;
}

HistoryView History::snapshot(size_t window) const {
    if (window < 1 || window > records_.size())
        throw std::out_of_range("history holds " + std::to_string(records_.size()) +
                                " records, snapshot of " + std::to_string(window) + " requested");
    return {std::span<const HistoryRecord>(records_).subspan(records_.size() - window, window),
            records_.back().t};
}

void History::export_csv(std::ostream& out) const {
    const size_t d_theta = records_.empty() ? 0 : records_.front().theta.size();
    const size_t d_exo = records_.empty() ? 0 : records_.front().exogenous.size();
    out << "t";
    for (size_t i = 0; i < d_theta; ++i) out << ",theta_" << i;
    out << ",reward";
    for (size_t i = 0; i < d_exo; ++i) out << ",xu_" << i;
    out << "\n";
    for (const auto& r : records_) {
        out << r.t;
        for (double v : r.theta) out << "," << fmt_double(v);
        out << "," << fmt_double(r.reward);
        for (double v : r.exogenous) out << "," << fmt_double(v);
        out << "\n";
    }
}

History History::import_csv(std::istream& in, size_t capacity) {
    std::string line;
    if (!std::getline(in, line)) throw ConfigError("history csv: empty stream");
    size_t d_theta = 0, d_exo = 0;
    {
        std::stringstream header(line);
        std::string col;
        bool saw_reward = false;
        if (!std::getline(header, col, ',') || col != "t")
            throw ConfigError("history csv: first column must be 't'");
        while (std::getline(header, col, ',')) {
            if (col.rfind("theta_", 0) == 0 && !saw_reward)
                ++d_theta;
            else if (col == "reward")
                saw_reward = true;
            else if (col.rfind("xu_", 0) == 0 && saw_reward)
                ++d_exo;
            else
                throw ConfigError("history csv: unexpected column '" + col + "'");
        }
        if (!saw_reward) throw ConfigError("history csv: missing reward column");
    }
    History h(capacity);
    long line_no = 1;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty()) continue;
        std::stringstream row(line);
        std::string field;
        HistoryRecord rec;
        auto next = [&]() -> std::string {
            if (!std::getline(row, field, ','))
                throw ConfigError("history csv line " + std::to_string(line_no) +
                                  ": too few fields");
            return field;
        };
        rec.t = std::stol(next());
        rec.theta.resize(d_theta);
        for (size_t i = 0; i < d_theta; ++i) rec.theta[i] = std::stod(next());
        rec.reward = std::stod(next());
        rec.exogenous.resize(d_exo);
        for (size_t i = 0; i < d_exo; ++i) rec.exogenous[i] = std::stod(next());
        h.push(std::move(rec));
    }
    return h;
}

}  // namespace polis
