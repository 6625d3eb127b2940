#pragma once

#include <oneapi/tbb/blocked_range.h>
#include <oneapi/tbb/parallel_for.h>
#include <oneapi/tbb/partitioner.h>
#include <oneapi/tbb/task_arena.h>

#include <algorithm>
#include <memory>
#include <thread>

namespace partraj
{

    // Bulk-synchronous index loop. Each call returns only after every index ran,
    // which is the barrier between phases of one iteration. With one worker the
    // loop runs inline on the caller.
    class Executor
    {
    public:
        explicit Executor(int workers = 0)
        {
            if (workers <= 0)
                workers = static_cast<int>(std::max(1u, std::thread::hardware_concurrency()));
            workers_ = workers;
            if (workers_ > 1)
                arena_ = std::make_unique<tbb::task_arena>(workers_);
        }

        int workers() const { return workers_; }

        template <typename Fn>
        void forEach(int count, Fn &&fn) const
        {
            if (count <= 0)
                return;
            if (!arena_ || count == 1)
            {
                for (int i = 0; i < count; ++i)
                    fn(i);
                return;
            }
            const int grain = std::max(1, count / (4 * workers_));
            arena_->execute([&]
                            { tbb::parallel_for(
                                  tbb::blocked_range<int>(0, count, grain),
                                  [&](const tbb::blocked_range<int> &r)
                                  {
                                      for (int i = r.begin(); i != r.end(); ++i)
                                          fn(i);
                                  },
                                  tbb::simple_partitioner()); });
        }

    private:
        int workers_ = 1;
        std::unique_ptr<tbb::task_arena> arena_;
    };

} // namespace partraj
