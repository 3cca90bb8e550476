#pragma once

#include <cstddef>
#include <vector>

namespace ifx {

enum class AxisKind { Time, Lag, Frequency };

/// One numeric sequence indexed by an increasing axis (time stamps, ACF lags or PS frequencies).
struct Channel {
    std::vector<double> axis;
    std::vector<double> value;
    AxisKind axis_kind = AxisKind::Time;

    std::size_t size() const noexcept { return value.size(); }
    bool empty() const noexcept { return value.empty(); }

    /// Channel over the implicit axis 0,1,2,...
    static Channel indexed(std::vector<double> values)
    {
        Channel c;
        c.axis.resize(values.size());
        for (std::size_t i = 0; i < values.size(); ++i)
            c.axis[i] = static_cast<double>(i);
        c.value = std::move(values);
        return c;
    }

    friend bool operator==(const Channel&, const Channel&) = default;
};

} // namespace ifx
