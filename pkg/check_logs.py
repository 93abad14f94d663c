import sys
from datetime import datetime, timedelta

from app import db, load_settings
from models import ErrorLog, PlanRun


def show_recent_runs(hours=24, session=None):
    """Show planner runs from the last X hours"""
    if session is None:
        settings = load_settings()
        if not settings.ledger_enabled:
            print("LIE_PLANNER_DATABASE_URL environment variable not set")
            return
        try:
            db.init(settings.database_url)
        except Exception as e:
            print(f"Error connecting to database: {str(e)}")
            return
        session = db.session

    time_threshold = datetime.now() - timedelta(hours=hours)
    runs = (session.query(PlanRun)
            .filter(PlanRun.created_at > time_threshold)
            .order_by(PlanRun.created_at.desc())
            .all())

    if not runs:
        print(f"No runs found in the last {hours} hours")
        return

    print(f"Found {len(runs)} runs in the last {hours} hours:")
    print("=" * 80)
    for run in runs:
        residual = '-' if run.residual is None else f"{run.residual:.3e}"
        print(f"ID: {run.id} | {run.created_at} | {run.command} {run.group or ''} {run.family or ''} "
              f"| Residual: {residual} | {run.duration_ms} ms | Success: {run.success}")
    print("=" * 80)

    errors = (session.query(ErrorLog)
              .filter(ErrorLog.created_at > time_threshold)
              .order_by(ErrorLog.created_at.desc())
              .all())
    print(f"Errors in the last {hours} hours: {len(errors)}")

    if errors:
        print("\nMost recent errors:")
        print("-" * 80)
        for e in errors[:5]:
            print(f"Error ID: {e.id} | Run: {e.run_id} | {e.created_at}")
            print(f"Type: {e.error_type}")
            message = e.error_message
            print(f"Message: {message[:150]}..." if len(message) > 150 else f"Message: {message}")
            print("-" * 80)


if __name__ == "__main__":
    print("Checking recent runs...")
    show_recent_runs(hours=float(sys.argv[1]) if len(sys.argv) > 1 else 24)
