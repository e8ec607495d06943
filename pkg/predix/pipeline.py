import os
import sys
import getpass
import datetime
import platform

from predix.system import vmpeak


class ExperimentLog:
    """
    Timestamped message log for command-line experiments.
    """

    def __init__(self, name, log=None, resume=False, quiet=False):
        """
        Prints tagged progress messages to the console and, optionally, appends
        them to a log file. Messages look like:

            0:00:12   RUN | b_prog=0.5 b_pred=1.0 mode=two_head seed=0

        Parameters
        ----------
        name : str
            Experiment name, printed in the header and exit messages.
        log : str, optional
            Log file to append messages to. Parent directories are created.
        resume : bool
            Whether the invocation picks up a previously interrupted experiment.
        quiet : bool
            Only write to the log file, not the console.
        """
        self.name = name
        self.quiet = quiet
        self.warnings = 0

        # configure log file
        self.log = os.path.abspath(log) if log is not None else None
        if self.log is not None:
            os.makedirs(os.path.dirname(self.log), exist_ok=True)
            # add a few empty lines if the log already exists
            if os.path.isfile(self.log):
                with open(self.log, 'a') as file:
                    file.write('\n\n')

        # cache start time
        self.start_time = datetime.datetime.now()

        self.info(f'{self.name} experiment')
        if resume:
            self.info(f'Resuming processing on {self.start_time}')
        else:
            self.info(f'New invocation on {self.start_time}')
        cmdline = ' '.join(sys.argv[1:])
        self.info(f'Command options: {cmdline}')
        try:
            user = getpass.getuser()
        except (KeyError, OSError):
            user = 'unknown'
        self.info(f'User: {user}')
        self.info(f'Host: {platform.node()}')
        self.info(f'System: {platform.system()} {platform.release()}')

    def total_time(self):
        """
        Returns the total time since start.
        """
        return datetime.datetime.now() - self.start_time

    def total_time_str(self):
        """
        Returns the total time since start in string form.
        """
        return str(self.total_time()).split('.')[0]

    def _print_message(self, tag, message):
        """
        Prints a message to the console and log with timestamp and tag information.
        """
        dt = self.total_time_str()
        tag = tag.rjust(5)
        message = f'{dt} {tag} | {message}'

        if self.log:
            with open(self.log, 'a') as file:
                file.write(message + '\n')

        if not self.quiet:
            print(message, flush=True)

    def info(self, message):
        """
        Print a message.
        """
        self._print_message('INFO', message)

    def print(self, message):
        """
        Print a message. Alias for `info()`.
        """
        self.info(message)

    def run(self, message):
        """
        Print a message marking the start of a unit of work.
        """
        self._print_message('RUN', message)

    def warn(self, message):
        """
        Print a non-fatal warning and count it.
        """
        self.warnings += 1
        self._print_message('WARN', message)

    def done(self, code=0):
        """
        Exit the experiment with a success (0) or partial-failure (2) code.
        """
        peak = vmpeak()
        if peak is not None:
            self.info(f'Peak memory: {peak / 1e6:.2f} GB')
        if code == 0:
            self._print_message('EXIT', f'{self.name} finished successfully')
        else:
            self._print_message('EXIT', f'{self.name} finished with failures')
        sys.exit(code)

    def fatal(self, message=None, code=1):
        """
        Throw an error and exit the experiment.
        """
        if message is None:
            self._print_message('ERROR', 'Fatal error')
        else:
            self._print_message('ERROR', 'Fatal: ' + message)
        sys.exit(code)


def log_message(log, message, tag='info'):
    """
    Forward a message to an optional `ExperimentLog`. Does nothing without a log.
    """
    if log is not None:
        getattr(log, tag)(message)
