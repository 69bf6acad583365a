import logging

from django.dispatch import Signal, receiver

logger = logging.getLogger(__name__)

# Sent once per frame by pipeline.finish_frame with ``result`` (a FrameResult).
frame_processed = Signal()

# Sent by pipeline.write_results with ``summary`` (a RunSummary).
run_finished = Signal()


@receiver(frame_processed)
def log_obstacle_alarm(sender, result, **kwargs):
    """Raise the alarm line for frames with final detections"""
    if result.alarm:
        boxes = ', '.join(
            f"({d.bbox.x_min},{d.bbox.y_min},{d.bbox.x_max},{d.bbox.y_max})[{'+'.join(sorted(d.sources))}]"
            for d in result.detections
        )
        logger.warning("frame %06d: %d obstacle(s) in ROI: %s", result.frame_id, len(result.detections), boxes)
    if not result.ground_found:
        logger.info("frame %06d: no ground plane found, stereo channel skipped", result.frame_id)


@receiver(run_finished)
def log_run_summary(sender, summary, **kwargs):
    timings = ', '.join(f"{stage}={ms:.1f}ms" for stage, ms in sorted(summary.mean_timings_ms.items()))
    logger.info("run finished: %d frame(s), %d with alarms; mean %s",
                summary.frame_count, summary.alarm_frames, timings or 'n/a')
