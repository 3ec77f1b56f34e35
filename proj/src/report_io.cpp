#include "foresight/report_io.hpp"

#include <cstdio>
#include <fstream>
#include <sstream>
#include <string>

#include "foresight/errors.hpp"

namespace foresight
{

namespace
{

constexpr const char* kStepHeader = "t,attempts,successes,rate,sigma2_mean";

std::string real(double v)
{
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

}  // namespace

void write_step_csv(std::ostream& out, const std::vector<StepRate>& rows)
{
    out << kStepHeader << '\n';
    for (const StepRate& r : rows)
    {
        out << r.t << ',' << r.attempts << ',' << r.successes << ',' << real(r.rate) << ',' << real(r.sigma2_mean)
            << '\n';
    }
}

std::vector<StepRate> read_step_csv(std::istream& in)
{
    std::string line;
    if (!std::getline(in, line) || line != kStepHeader)
    {
        throw Error(ErrorCode::ParseError, "missing step CSV header");
    }
    std::vector<StepRate> rows;
    while (std::getline(in, line))
    {
        if (line.empty())
        {
            continue;
        }
        std::istringstream ss(line);
        std::string field[5];
        for (int i = 0; i < 5; ++i)
        {
            if (!std::getline(ss, field[i], ','))
            {
                throw Error(ErrorCode::ParseError, "short step CSV row: " + line);
            }
        }
        try
        {
            StepRate r;
            r.t = std::stoi(field[0]);
            r.attempts = std::stoi(field[1]);
            r.successes = std::stoi(field[2]);
            r.rate = std::stod(field[3]);
            r.sigma2_mean = std::stod(field[4]);
            rows.push_back(r);
        }
        catch (const std::logic_error&)
        {
            throw Error(ErrorCode::ParseError, "bad step CSV row: " + line);
        }
    }
    return rows;
}

void write_json_file(const std::filesystem::path& path, const nlohmann::json& j)
{
    if (path.has_parent_path())
    {
        std::filesystem::create_directories(path.parent_path());
    }
    std::ofstream out(path);
    if (!out)
    {
        throw Error(ErrorCode::InvalidArgument, "cannot write " + path.string());
    }
    out << j.dump(2) << '\n';
}

nlohmann::json read_json_file(const std::filesystem::path& path)
{
    std::ifstream in(path);
    if (!in)
    {
        throw Error(ErrorCode::InvalidArgument, "cannot read " + path.string());
    }
    try
    {
        return nlohmann::json::parse(in);
    }
    catch (const nlohmann::json::exception& e)
    {
        throw Error(ErrorCode::ParseError, path.string() + ": " + e.what());
    }
}

}  // namespace foresight
