#pragma once

#include <Eigen/Core>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "dircast/date.hpp"
#include "dircast/direction.hpp"

namespace dircast::timeseries {

struct Observation {
    Date date;
    double close = 0.0;
};

// Dated closing prices for one instrument. Immutable after construction;
// the constructor enforces strictly increasing dates and positive closes.
class PriceSeries {
public:
    PriceSeries(std::string instrument_id, std::vector<Observation> observations);

    const std::string& instrument_id() const { return instrument_id_; }
    const std::vector<Observation>& observations() const { return observations_; }
    std::size_t size() const { return observations_.size(); }

private:
    std::string instrument_id_;
    std::vector<Observation> observations_;
};

// Rectangular date-by-instrument close matrix on a reference calendar.
// No missing cells; every value is positive.
class AlignedPanel {
public:
    AlignedPanel(std::vector<Date> calendar, std::vector<std::string> instruments,
                 Eigen::MatrixXd values);

    const std::vector<Date>& calendar() const { return calendar_; }
    const std::vector<std::string>& instruments() const { return instruments_; }
    const Eigen::MatrixXd& values() const { return values_; }

    Eigen::Index rows() const { return values_.rows(); }
    Eigen::Index cols() const { return values_.cols(); }

    std::optional<Eigen::Index> find_column(std::string_view instrument) const;
    Eigen::Index column_of(std::string_view instrument) const;  // throws DomainError

    // Extracts one instrument as a PriceSeries (used for re-alignment checks).
    PriceSeries series(Eigen::Index column) const;

    void write_csv(std::ostream& os) const;  // date,<instrument...>; RFC-4180
    std::string to_csv() const;
    static AlignedPanel read_csv(std::string_view text);

private:
    std::vector<Date> calendar_;
    std::vector<std::string> instruments_;
    Eigen::MatrixXd values_;
};

// Lagged percent changes of one panel column: value at date j is
// (p_j - p_{j-lag}) / p_{j-lag} * 100, covering dates lag..end.
struct ReturnSeries {
    std::string instrument_id;
    int lag = 1;
    std::vector<Date> dates;
    Eigen::VectorXd values;
};

// Next-day move directions: label at date j describes the move j -> j+1,
// so the series covers all panel dates but the last.
struct LabelSeries {
    std::string instrument_id;
    std::vector<Date> dates;
    std::vector<Direction> labels;
};

// Reads `date,close` CSV text. Rows are sorted ascending by date; duplicate
// dates and non-positive closes are rejected.
PriceSeries parse_price_csv(std::string_view text, std::string instrument_id,
                            const std::string& date_format = "%Y-%m-%d");
PriceSeries parse_price_csv(std::istream& in, std::string instrument_id,
                            const std::string& date_format = "%Y-%m-%d");

std::string price_series_to_csv(const PriceSeries& series);

// Aligns every series to the reference instrument's dates within [range).
// Dates the reference does not trade are dropped; reference dates an
// instrument lacks are forward-filled from its most recent prior close.
AlignedPanel align_panel(std::span<const PriceSeries> series,
                         std::string_view reference, DateInterval range);

Eigen::VectorXd rdp_values(const Eigen::VectorXd& prices, int lag);
ReturnSeries rdp(const AlignedPanel& panel, Eigen::Index column, int lag);
ReturnSeries rdp(const AlignedPanel& panel, std::string_view instrument, int lag);

LabelSeries direction_labels(const AlignedPanel& panel, Eigen::Index column);
LabelSeries direction_labels(const AlignedPanel& panel, std::string_view instrument);

}  // namespace dircast::timeseries
