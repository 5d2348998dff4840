#include "dsct/image.hpp"

#include <algorithm>
#include <limits>

namespace dsct {

double Image::min() const
{
    if (values_.empty())
        return std::numeric_limits<double>::quiet_NaN();
    return *std::min_element(values_.begin(), values_.end());
}

double Image::max() const
{
    if (values_.empty())
        return std::numeric_limits<double>::quiet_NaN();
    return *std::max_element(values_.begin(), values_.end());
}

} // namespace dsct
