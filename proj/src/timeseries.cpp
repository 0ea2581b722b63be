#include "dircast/timeseries.hpp"

#include <algorithm>
#include <cmath>
#include <istream>
#include <ostream>
#include <sstream>
#include <utility>

#include "dircast/csv.hpp"
#include "dircast/errors.hpp"

namespace dircast::timeseries {

PriceSeries::PriceSeries(std::string instrument_id,
                         std::vector<Observation> observations)
    : instrument_id_(std::move(instrument_id)),
      observations_(std::move(observations)) {
    for (std::size_t i = 0; i < observations_.size(); ++i) {
        const Observation& obs = observations_[i];
        if (!(obs.close > 0.0) || !std::isfinite(obs.close)) {
            throw ValidationError(instrument_id_ + ": non-positive close " +
                                  csv::format_double(obs.close) + " on " +
                                  obs.date.to_iso());
        }
        if (i > 0) {
            if (observations_[i - 1].date == obs.date) {
                throw ValidationError(instrument_id_ + ": duplicate date " +
                                      obs.date.to_iso());
            }
            if (observations_[i - 1].date > obs.date) {
                throw ValidationError(instrument_id_ +
                                      ": dates not ascending at " +
                                      obs.date.to_iso());
            }
        }
    }
}

AlignedPanel::AlignedPanel(std::vector<Date> calendar,
                           std::vector<std::string> instruments,
                           Eigen::MatrixXd values)
    : calendar_(std::move(calendar)),
      instruments_(std::move(instruments)),
      values_(std::move(values)) {
    if (values_.rows() != static_cast<Eigen::Index>(calendar_.size()) ||
        values_.cols() != static_cast<Eigen::Index>(instruments_.size())) {
        throw ValidationError("panel shape does not match calendar/instruments");
    }
    for (std::size_t i = 1; i < calendar_.size(); ++i) {
        if (!(calendar_[i - 1] < calendar_[i])) {
            throw ValidationError("panel calendar not strictly increasing at " +
                                  calendar_[i].to_iso());
        }
    }
    if ((values_.array() <= 0.0).any() || !values_.allFinite()) {
        throw ValidationError("panel contains non-positive or non-finite cells");
    }
}

std::optional<Eigen::Index> AlignedPanel::find_column(
    std::string_view instrument) const {
    for (std::size_t i = 0; i < instruments_.size(); ++i) {
        if (instruments_[i] == instrument) {
            return static_cast<Eigen::Index>(i);
        }
    }
    return std::nullopt;
}

Eigen::Index AlignedPanel::column_of(std::string_view instrument) const {
    if (auto idx = find_column(instrument)) return *idx;
    throw DomainError("instrument '" + std::string(instrument) +
                      "' not in panel");
}

PriceSeries AlignedPanel::series(Eigen::Index column) const {
    if (column < 0 || column >= cols()) {
        throw DomainError("panel column out of range");
    }
    std::vector<Observation> obs;
    obs.reserve(calendar_.size());
    for (Eigen::Index r = 0; r < rows(); ++r) {
        obs.push_back({calendar_[static_cast<std::size_t>(r)],
                       values_(r, column)});
    }
    return PriceSeries(instruments_[static_cast<std::size_t>(column)],
                       std::move(obs));
}

void AlignedPanel::write_csv(std::ostream& os) const {
    std::vector<std::string> row;
    row.reserve(instruments_.size() + 1);
    row.emplace_back("date");
    for (const auto& id : instruments_) row.push_back(id);
    csv::write_row(os, row);
    for (Eigen::Index r = 0; r < rows(); ++r) {
        row.clear();
        row.push_back(calendar_[static_cast<std::size_t>(r)].to_iso());
        for (Eigen::Index c = 0; c < cols(); ++c) {
            row.push_back(csv::format_double(values_(r, c)));
        }
        csv::write_row(os, row);
    }
}

std::string AlignedPanel::to_csv() const {
    std::ostringstream os;
    write_csv(os);
    return os.str();
}

AlignedPanel AlignedPanel::read_csv(std::string_view text) {
    const auto records = csv::parse(text);
    if (records.empty()) throw ParseError("empty panel CSV");
    const auto& header = records[0].fields;
    if (header.size() < 2 || header[0] != "date") {
        throw ParseError("panel CSV header must be 'date,<instrument...>'");
    }
    std::vector<std::string> instruments(header.begin() + 1, header.end());
    std::vector<Date> calendar;
    Eigen::MatrixXd values(static_cast<Eigen::Index>(records.size() - 1),
                           static_cast<Eigen::Index>(instruments.size()));
    for (std::size_t i = 1; i < records.size(); ++i) {
        const auto& rec = records[i];
        if (rec.fields.size() != header.size()) {
            throw ParseError("line " + std::to_string(rec.line) +
                             ": expected " + std::to_string(header.size()) +
                             " fields, got " +
                             std::to_string(rec.fields.size()));
        }
        calendar.push_back(Date::parse(rec.fields[0]));
        for (std::size_t c = 1; c < rec.fields.size(); ++c) {
            try {
                values(static_cast<Eigen::Index>(i - 1),
                       static_cast<Eigen::Index>(c - 1)) =
                    std::stod(rec.fields[c]);
            } catch (const std::exception&) {
                throw ParseError("line " + std::to_string(rec.line) +
                                 ": unparsable number '" + rec.fields[c] + "'");
            }
        }
    }
    return AlignedPanel(std::move(calendar), std::move(instruments),
                        std::move(values));
}

PriceSeries parse_price_csv(std::string_view text, std::string instrument_id,
                            const std::string& date_format) {
    const auto records = csv::parse(text);
    if (records.empty()) {
        throw ParseError(instrument_id + ": empty price CSV");
    }
    const auto& header = records[0].fields;
    if (header.size() != 2 || header[0] != "date" || header[1] != "close") {
        throw ParseError(instrument_id + ": line " +
                         std::to_string(records[0].line) +
                         ": expected header 'date,close'");
    }
    std::vector<Observation> obs;
    obs.reserve(records.size() - 1);
    for (std::size_t i = 1; i < records.size(); ++i) {
        const auto& rec = records[i];
        if (rec.fields.size() != 2) {
            throw ParseError(instrument_id + ": line " +
                             std::to_string(rec.line) + ": expected 2 fields, got " +
                             std::to_string(rec.fields.size()));
        }
        Date date;
        try {
            date = Date::parse(rec.fields[0], date_format);
        } catch (const ParseError& e) {
            throw ParseError(instrument_id + ": line " +
                             std::to_string(rec.line) + ": " + e.what());
        }
        double close = 0.0;
        try {
            std::size_t pos = 0;
            close = std::stod(rec.fields[1], &pos);
            while (pos < rec.fields[1].size() &&
                   std::isspace(static_cast<unsigned char>(rec.fields[1][pos]))) {
                ++pos;
            }
            if (pos != rec.fields[1].size()) throw std::invalid_argument("");
        } catch (const std::exception&) {
            throw ParseError(instrument_id + ": line " +
                             std::to_string(rec.line) + ": unparsable close '" +
                             rec.fields[1] + "'");
        }
        obs.push_back({date, close});
    }
    std::stable_sort(obs.begin(), obs.end(),
                     [](const Observation& a, const Observation& b) {
                         return a.date < b.date;
                     });
    return PriceSeries(std::move(instrument_id), std::move(obs));
}

PriceSeries parse_price_csv(std::istream& in, std::string instrument_id,
                            const std::string& date_format) {
    std::ostringstream buffer;
    buffer << in.rdbuf();
    return parse_price_csv(buffer.str(), std::move(instrument_id), date_format);
}

std::string price_series_to_csv(const PriceSeries& series) {
    std::ostringstream os;
    os << "date,close\n";
    for (const auto& obs : series.observations()) {
        os << obs.date.to_iso() << ',' << csv::format_double(obs.close) << '\n';
    }
    return os.str();
}

AlignedPanel align_panel(std::span<const PriceSeries> series,
                         std::string_view reference, DateInterval range) {
    const PriceSeries* ref = nullptr;
    for (const auto& s : series) {
        if (s.instrument_id() == reference) {
            ref = &s;
            break;
        }
    }
    if (ref == nullptr) {
        throw DomainError("reference instrument '" + std::string(reference) +
                          "' not among the input series");
    }

    std::vector<Date> calendar;
    for (const auto& obs : ref->observations()) {
        if (range.contains(obs.date)) calendar.push_back(obs.date);
    }
    if (calendar.empty()) {
        throw AlignmentError("reference '" + std::string(reference) +
                             "' has no trading days in [" +
                             range.start.to_iso() + ", " + range.end.to_iso() +
                             ")");
    }

    std::vector<std::string> instruments;
    instruments.reserve(series.size());
    Eigen::MatrixXd values(static_cast<Eigen::Index>(calendar.size()),
                           static_cast<Eigen::Index>(series.size()));

    for (std::size_t c = 0; c < series.size(); ++c) {
        const PriceSeries& s = series[c];
        instruments.push_back(s.instrument_id());
        const auto& obs = s.observations();
        // Walk the instrument's dates alongside the calendar: dates outside
        // the calendar are skipped, calendar dates the instrument lacks take
        // the most recent prior close.
        std::size_t k = 0;
        double last_close = 0.0;
        bool have_prior = false;
        for (std::size_t r = 0; r < calendar.size(); ++r) {
            const Date d = calendar[r];
            while (k < obs.size() && obs[k].date <= d) {
                last_close = obs[k].close;
                have_prior = true;
                ++k;
            }
            if (!have_prior) {
                throw AlignmentError(
                    s.instrument_id() + ": no close on or before " +
                    d.to_iso() + " to fill the first calendar date");
            }
            values(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) =
                last_close;
        }
    }
    return AlignedPanel(std::move(calendar), std::move(instruments),
                        std::move(values));
}

Eigen::VectorXd rdp_values(const Eigen::VectorXd& prices, int lag) {
    if (lag <= 0) throw DomainError("rdp lag must be positive");
    if (lag >= prices.size()) {
        throw DomainError("rdp lag " + std::to_string(lag) +
                          " >= series length " + std::to_string(prices.size()));
    }
    const Eigen::Index n = prices.size() - lag;
    Eigen::VectorXd out(n);
    for (Eigen::Index j = 0; j < n; ++j) {
        const double base = prices[j];
        out[j] = (prices[j + lag] - base) / base * 100.0;
    }
    return out;
}

ReturnSeries rdp(const AlignedPanel& panel, Eigen::Index column, int lag) {
    if (column < 0 || column >= panel.cols()) {
        throw DomainError("panel column out of range");
    }
    ReturnSeries out;
    out.instrument_id = panel.instruments()[static_cast<std::size_t>(column)];
    out.lag = lag;
    out.values = rdp_values(panel.values().col(column), lag);
    out.dates.assign(panel.calendar().begin() + lag, panel.calendar().end());
    return out;
}

ReturnSeries rdp(const AlignedPanel& panel, std::string_view instrument,
                 int lag) {
    return rdp(panel, panel.column_of(instrument), lag);
}

LabelSeries direction_labels(const AlignedPanel& panel, Eigen::Index column) {
    if (column < 0 || column >= panel.cols()) {
        throw DomainError("panel column out of range");
    }
    if (panel.rows() < 2) {
        throw DomainError("direction labels need at least 2 observations");
    }
    LabelSeries out;
    out.instrument_id = panel.instruments()[static_cast<std::size_t>(column)];
    out.dates.assign(panel.calendar().begin(), panel.calendar().end() - 1);
    out.labels.reserve(static_cast<std::size_t>(panel.rows() - 1));
    for (Eigen::Index j = 0; j + 1 < panel.rows(); ++j) {
        out.labels.push_back(direction_of_move(panel.values()(j, column),
                                               panel.values()(j + 1, column)));
    }
    return out;
}

LabelSeries direction_labels(const AlignedPanel& panel,
                             std::string_view instrument) {
    return direction_labels(panel, panel.column_of(instrument));
}

}  // namespace dircast::timeseries
